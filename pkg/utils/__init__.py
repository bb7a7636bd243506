#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ユーティリティモジュール

ゼロモード検出ツールの共通関数群
"""

from .helpers import (
    atomic_write_bytes,
    atomic_write_text,
    to_builtin,
    format_float,
    sanitize_filename,
    allocate_run_directory,
    write_csv,
    validate_record_structure
)

__all__ = [
    'atomic_write_bytes',
    'atomic_write_text',
    'to_builtin',
    'format_float',
    'sanitize_filename',
    'allocate_run_directory',
    'write_csv',
    'validate_record_structure'
]
