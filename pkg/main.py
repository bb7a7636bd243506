#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
パウリ作用素ゼロモード検出ツール（Pauli Zero-Mode Lab）
==================================================

このプログラムは、周期箱上に離散化した3次元のパウリ作用素
P_{tA} = (σ·((1/i)∇ + tA))^2 について、結合定数 t を変えながら
ゼロモード（零固有値）の現れる t を数値的に検出するツールです。

主な機能:
-------
- 磁場 B からクーロンゲージのベクトルポテンシャル A の再構成（gauge）
- 1つの t での最小固有値・nullity・Birman-Schwinger 固有値（spectrum）
- t のスイープとゼロモードの検出・精密化、gnuplot スクリプト出力（sweep）
- ランダム摂動によるゼロモードの消失実験（perturb）
- 作用素と不等式の性質検証スイート（validate）

使用方法:
-------
```
python main.py サブコマンド [--config PATH] [--out DIR] [--grid N] [--box L]
               [--t A:B:STEP] [--seed S] [--print-config]
```

例:
```
python main.py spectrum --grid 64 --box 16 --t 1.0
python main.py sweep --config sweep.yaml --t 0.6:2.0:0.05
python main.py validate --grid 8 --box 8
```

出力:
<out>/<サブコマンド>_NNNN/ に record.yaml（と sweep の場合は CSV と sweep.gp）

終了コード:
-------
- 0: 成功
- 1: 設定エラー
- 2: 計算または検証の失敗
"""

import argparse
import logging
import sys
import time
from typing import Any, Dict, List, Optional

# LangGraphのインポート
from langgraph.graph import StateGraph, END
from typing_extensions import TypedDict

# 自作モジュールのインポート
from config import DEBUG
from plot_emitter import emit_plot_script
from utils.helpers import allocate_run_directory
from zeromode.errors import ConfigError
from zeromode.field_io import save_grid_data
from zeromode.fields import (
    LossYau,
    describe_source,
    divergence_residual,
    loss_yau_coulomb_zero_mode,
    lp_norm,
    lp_profile,
    sample,
    solenoidal_projection,
)
from zeromode.gauge import biot_savart, fit_gauge_constant
from zeromode.grid import make_grid
from zeromode.pauli import PauliContext
from zeromode.records import RecordFormatter, ResultRecord, sweep_payload
from zeromode.run_config import RunConfig, load_run_config, parse_coupling
from zeromode.spectral import bs_spectrum, nullity_estimate, zero_mode_overlap
from zeromode.sweep import (
    convergence_study,
    coupling_grid,
    detect_in_context,
    perturb_experiment,
    smoothness_diagnostic,
    sweep_context,
)
from zeromode.validation import run_validation

# ロガーの設定
logging.basicConfig(
    level=logging.DEBUG if DEBUG else logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# gauge コマンドの合格基準
GAUGE_CURL_TOL = 1e-6
GAUGE_DIV_TOL = 1e-8
LP_EXPONENTS = [0.8, 1.0, 1.5, 2.0, 3.0]


class LabState(TypedDict):
    """処理状態を管理するクラス"""
    command: str
    config: Any
    field: Any
    gauge: Any
    context: Any
    payload: Dict[str, Any]
    artifacts: Dict[str, Any]
    timings: Dict[str, float]
    record: Any
    run_dir: str
    current_step: str
    error_message: str
    exit_code: int
    processing_complete: bool


def _exit_code_for(error: BaseException) -> int:
    return 1 if isinstance(error, ConfigError) else 2


class ZeroModeLab:
    """
    ゼロモード検出ツールのメインクラス

    LangGraphを使用して設定読み込みから結果保存までの処理を管理
    """

    def __init__(self, command: str, config_path: Optional[str] = None,
                 overrides: Optional[Dict[str, Any]] = None, config: Optional[RunConfig] = None):
        """
        初期化

        Args:
            command: サブコマンド
            config_path: YAML 設定ファイルのパス
            overrides: コマンドライン引数による上書き
            config: 構築済みの設定（指定時は config_path と overrides を使わない）
        """
        self.command = command
        self.config_path = config_path
        self.overrides = dict(overrides or {})
        self.preset = config
        self.formatter = RecordFormatter()
        self.workflow = self._build_workflow()

    def _build_workflow(self) -> StateGraph:
        """
        LangGraphワークフローを構築する

        Returns:
            StateGraph: 構築されたワークフロー
        """
        workflow = StateGraph(LabState)

        workflow.add_node("load_config", self._load_config)
        workflow.add_node("prepare_field", self._prepare_field)
        workflow.add_node("build_gauge", self._build_gauge)
        workflow.add_node("run_gauge", self._run_gauge)
        workflow.add_node("run_spectrum", self._run_spectrum)
        workflow.add_node("run_sweep", self._run_sweep)
        workflow.add_node("run_perturb", self._run_perturb)
        workflow.add_node("run_validate", self._run_validate)
        workflow.add_node("save_output", self._save_output)

        workflow.set_entry_point("load_config")
        workflow.add_conditional_edges("load_config", self._route_after_config, {
            "prepare_field": "prepare_field",
            "run_validate": "run_validate",
            "save_output": "save_output",
        })
        workflow.add_edge("prepare_field", "build_gauge")
        workflow.add_conditional_edges("build_gauge", self._route_command, {
            "run_gauge": "run_gauge",
            "run_spectrum": "run_spectrum",
            "run_sweep": "run_sweep",
            "run_perturb": "run_perturb",
            "save_output": "save_output",
        })
        for node in ("run_gauge", "run_spectrum", "run_sweep", "run_perturb", "run_validate"):
            workflow.add_edge(node, "save_output")
        workflow.add_edge("save_output", END)

        return workflow.compile()

    def _route_after_config(self, state: LabState) -> str:
        if state.get("error_message"):
            return "save_output"
        return "run_validate" if state["command"] == "validate" else "prepare_field"

    def _route_command(self, state: LabState) -> str:
        if state.get("error_message"):
            return "save_output"
        return f"run_{state['command']}"

    def _fail(self, state: LabState, step: str, error: BaseException) -> LabState:
        state["error_message"] = str(error)
        state["current_step"] = f"{step}_error"
        state["exit_code"] = _exit_code_for(error)
        return state

    def _load_config(self, state: LabState) -> LabState:
        """
        設定を読み込み、検証・確定する

        Args:
            state: 処理状態

        Returns:
            LabState: 更新された処理状態
        """
        logger.info("=== ステップ1: 設定読み込み ===")
        start = time.perf_counter()

        try:
            if self.preset is not None:
                config = self.preset
                config.command = self.command
                config.validate().materialize()
            else:
                config = load_run_config(self.config_path, {**self.overrides, "command": self.command})

            logger.info(f"設定読み込み完了: 磁場 {describe_source(config.source())}, "
                        f"L = {config.half_width}, N = {config.points_per_axis}, gap_tol = {config.gap_tol:.4e}")
            state["config"] = config
            state["current_step"] = "load_config_complete"

        except Exception as e:
            logger.error(f"設定読み込みエラー: {e}")
            self._fail(state, "load_config", e)

        state["timings"]["load_config"] = time.perf_counter() - start
        return state

    def _prepare_field(self, state: LabState) -> LabState:
        """
        磁場をサンプリングし、発散ゼロに射影する

        Args:
            state: 処理状態

        Returns:
            LabState: 更新された処理状態
        """
        logger.info("=== ステップ2: 磁場の準備 ===")
        start = time.perf_counter()

        try:
            if state.get("error_message"):
                return state

            config: RunConfig = state["config"]
            raw = sample(config.source(), config.grid())
            B = solenoidal_projection(raw)
            state["payload"]["field"] = {
                "description": describe_source(config.source()),
                "max_magnitude": B.max_magnitude(),
                "raw_divergence_residual": divergence_residual(raw),
                "divergence_residual": divergence_residual(B),
            }
            if config.export_field:
                path = save_grid_data(B, config.export_field, "text" if config.export_field.endswith(".txt")
                                      else "binary")
                state["payload"]["field"]["exported_to"] = str(path)
                logger.info(f"磁場を書き出しました: {path}")

            logger.info(f"磁場の準備完了: max|B| = {B.max_magnitude():.6g}")
            state["field"] = B
            state["current_step"] = "prepare_field_complete"

        except Exception as e:
            logger.error(f"磁場の準備エラー: {e}")
            self._fail(state, "prepare_field", e)

        state["timings"]["prepare_field"] = time.perf_counter() - start
        return state

    def _build_gauge(self, state: LabState) -> LabState:
        """
        ベクトルポテンシャルを再構成し、作用素の状態を作る

        Args:
            state: 処理状態

        Returns:
            LabState: 更新された処理状態
        """
        logger.info("=== ステップ3: ゲージ再構成 ===")
        start = time.perf_counter()

        try:
            if state.get("error_message"):
                return state

            config: RunConfig = state["config"]
            gauge = biot_savart(state["field"])
            state["gauge"] = gauge
            state["context"] = PauliContext.from_gauge(gauge, state["field"], t=config.t,
                                                       rtol=config.cg_rtol, maxiter=config.cg_maxiter)
            state["current_step"] = "build_gauge_complete"

        except Exception as e:
            logger.error(f"ゲージ再構成エラー: {e}")
            self._fail(state, "build_gauge", e)

        state["timings"]["build_gauge"] = time.perf_counter() - start
        return state

    def _run_gauge(self, state: LabState) -> LabState:
        """ゲージ再構成の検証量を記録する"""
        logger.info("=== ステップ4: gauge ===")
        start = time.perf_counter()

        try:
            if state.get("error_message"):
                return state

            gauge = state["gauge"]
            B = state["field"]
            payload = state["payload"]
            payload["gauge"] = gauge.summary()
            payload["lp_profile"] = [{"p": r.p, "value": r.value} for r in lp_profile(B, LP_EXPONENTS)]
            payload["gauge_constant"] = fit_gauge_constant([(gauge.l3_norm, gauge.l32_norm)])

            failures = []
            if gauge.curl_residual > GAUGE_CURL_TOL:
                failures.append(f"curl 残差 {gauge.curl_residual:.3e} > {GAUGE_CURL_TOL:.0e}")
            if gauge.div_residual > GAUGE_DIV_TOL:
                failures.append(f"div 残差 {gauge.div_residual:.3e} > {GAUGE_DIV_TOL:.0e}")
            payload["passed"] = not failures
            if failures:
                raise ValueError("ゲージ再構成の検証に失敗しました: " + ", ".join(failures))

            state["current_step"] = "run_gauge_complete"

        except Exception as e:
            logger.error(f"gauge エラー: {e}")
            self._fail(state, "run_gauge", e)

        state["timings"]["run_gauge"] = time.perf_counter() - start
        return state

    def _run_spectrum(self, state: LabState) -> LabState:
        """1つの t でスペクトル・nullity・BS 固有値を計算する"""
        logger.info("=== ステップ4: spectrum ===")
        start = time.perf_counter()

        try:
            if state.get("error_message"):
                return state

            config: RunConfig = state["config"]
            ctx: PauliContext = state["context"]
            settings = config.spectral_settings()

            nullity = nullity_estimate(ctx, settings=settings)
            spectrum = {
                "t": ctx.t,
                "gap_tol": nullity.gap_tol,
                "nullity": nullity.nullity,
                "indeterminate": nullity.indeterminate,
                "reasons": nullity.reasons,
                "saturated": nullity.saturated,
                "lambda_min": nullity.lambda_min,
                "next_gap": nullity.next_gap,
                "localization": nullity.localization,
                "eigenvalues": nullity.spectrum.eigenvalues,
                "residuals": nullity.spectrum.residuals,
                "converged": nullity.spectrum.converged,
                "localized_values": nullity.branch.values,
                "shell_fractions": nullity.branch.shell,
            }
            if isinstance(config.source(), LossYau) and ctx.t == 1.0:
                reference = loss_yau_coulomb_zero_mode(ctx.grid)
                spectrum["loss_yau_overlap"] = zero_mode_overlap(nullity.localized_vectors(ctx.grid), reference)

            bs = bs_spectrum(ctx, settings)
            state["payload"]["spectrum"] = spectrum
            state["payload"]["birman_schwinger"] = {
                "raw_top": bs.raw_top,
                "localized_top": bs.localized_top,
                "top": bs.top,
                "norm_bound": bs.norm_bound,
                "converged": bs.spectrum.converged,
                "method": bs.spectrum.method,
            }
            state["payload"]["solver"] = dict(vars(ctx.stats))

            if config.convergence_points:
                grids = [make_grid(config.half_width, n) for n in sorted(config.convergence_points)]
                table = convergence_study(config.source(), ctx.t, grids, settings, resolution=config.resolution)
                state["payload"]["convergence"] = table

            logger.info(f"spectrum 完了: nullity = {nullity.nullity}, BS 局在最大 = {bs.top:.6f}")
            state["current_step"] = "run_spectrum_complete"

        except Exception as e:
            logger.error(f"spectrum エラー: {e}")
            self._fail(state, "run_spectrum", e)

        state["timings"]["run_spectrum"] = time.perf_counter() - start
        return state

    def _run_sweep(self, state: LabState) -> LabState:
        """t をスイープしてゼロモードを検出する"""
        logger.info("=== ステップ4: sweep ===")
        start = time.perf_counter()

        try:
            if state.get("error_message"):
                return state

            config: RunConfig = state["config"]
            ctx: PauliContext = state["context"]
            settings = config.spectral_settings()

            t_values = coupling_grid((config.t_min, config.t_max), config.t_step)
            logger.info(f"スイープ: {len(t_values)}点, t ∈ [{t_values[0]}, {t_values[-1]}]")
            records = sweep_context(ctx, t_values, settings, config.workers)
            detections = detect_in_context(ctx, records, config.resolution, settings)

            failed = [r.t for r in records if r.failed]
            state["payload"]["sweep"] = {
                "gap_tol": config.gap_tol,
                "bs_tol": config.bs_tol,
                "points": len(records),
                "failed_points": failed,
                "records": sweep_payload(records),
            }
            state["payload"]["detections"] = detections
            state["payload"]["smoothness"] = smoothness_diagnostic(records)
            state["artifacts"]["records"] = records
            state["artifacts"]["detections"] = detections

            logger.info(f"sweep 完了: {len(detections)}件の検出")
            state["current_step"] = "run_sweep_complete"

        except Exception as e:
            logger.error(f"sweep エラー: {e}")
            self._fail(state, "run_sweep", e)

        state["timings"]["run_sweep"] = time.perf_counter() - start
        return state

    def _run_perturb(self, state: LabState) -> LabState:
        """ランダム摂動でゼロモードの変化を調べる"""
        logger.info("=== ステップ4: perturb ===")
        start = time.perf_counter()

        try:
            if state.get("error_message"):
                return state

            config: RunConfig = state["config"]
            base_norm = lp_norm(state["field"], 1.5).value
            epsilon = config.epsilon_relative * base_norm
            reports = perturb_experiment(config.source(), epsilon, config.trials, config.seed, config.grid(),
                                         config.spectral_settings(), t=config.t,
                                         correlation_length=config.correlation_length,
                                         require_base_detection=config.require_base_detection)
            state["payload"]["perturbation"] = {
                "base_l32_norm": base_norm,
                "epsilon": epsilon,
                "t": config.t,
                "reports": reports,
                "nullity_changed": sum(r.nullity_after != r.nullity_before for r in reports),
            }

            logger.info(f"perturb 完了: {len(reports)}試行")
            state["current_step"] = "run_perturb_complete"

        except Exception as e:
            logger.error(f"perturb エラー: {e}")
            self._fail(state, "run_perturb", e)

        state["timings"]["run_perturb"] = time.perf_counter() - start
        return state

    def _run_validate(self, state: LabState) -> LabState:
        """性質検証スイートを実行する"""
        logger.info("=== ステップ2: validate ===")
        start = time.perf_counter()

        try:
            if state.get("error_message"):
                return state

            results = run_validation(state["config"])
            failed = [r.name for r in results if not r.passed]
            state["payload"]["suites"] = results
            state["payload"]["failed_suites"] = failed
            if failed:
                state["error_message"] = f"検証スイートが失敗しました: {', '.join(failed)}"
                state["current_step"] = "run_validate_error"
                state["exit_code"] = 2
                logger.error(state["error_message"])
            else:
                state["current_step"] = "run_validate_complete"

        except Exception as e:
            logger.error(f"validate エラー: {e}")
            self._fail(state, "run_validate", e)

        state["timings"]["run_validate"] = time.perf_counter() - start
        return state

    def _save_output(self, state: LabState) -> LabState:
        """
        結果レコードを保存する（計算の失敗も記録する）

        Args:
            state: 処理状態

        Returns:
            LabState: 更新された処理状態
        """
        logger.info("=== ステップ5: 出力保存 ===")

        config: Optional[RunConfig] = state.get("config")
        if config is None:
            return state

        try:
            failed = bool(state.get("error_message"))
            record = ResultRecord(
                command=state["command"],
                config=config.to_dict(),
                payload=state["payload"],
                timings=state["timings"],
                status="failed" if failed else "success",
                error=state.get("error_message", ""),
                exit_code=state["exit_code"],
            )
            run_dir = allocate_run_directory(config.output_dir, state["command"])
            self.formatter.save_record(run_dir, record)

            if state["command"] == "sweep" and "records" in state["artifacts"]:
                self.formatter.save_sweep_table(run_dir, state["artifacts"]["records"], config.bs_k)
                self.formatter.save_detection_table(run_dir, state["artifacts"]["detections"])
                emit_plot_script(run_dir, config.gap_tol, config.bs_tol,
                                 title=f"{describe_source(config.source())} L={config.half_width} "
                                       f"N={config.points_per_axis}")

            logger.info(f"出力保存完了: {run_dir}")
            state["record"] = record
            state["run_dir"] = str(run_dir)
            state["processing_complete"] = not failed
            state["current_step"] = state["current_step"] if failed else "save_output_complete"

        except Exception as e:
            logger.error(f"出力保存エラー: {e}")
            if not state.get("error_message"):
                state["error_message"] = str(e)
                state["exit_code"] = 2
            state["current_step"] = "save_output_error"

        return state

    def process(self) -> LabState:
        """
        ワークフローを実行する

        Returns:
            LabState: 最終処理状態
        """
        logger.info(f"ゼロモード検出ツールを開始します: {self.command}")

        initial_state = LabState(
            command=self.command,
            config=None,
            field=None,
            gauge=None,
            context=None,
            payload={},
            artifacts={},
            timings={},
            record=None,
            run_dir="",
            current_step="initialized",
            error_message="",
            exit_code=0,
            processing_complete=False,
        )

        try:
            final_state = self.workflow.invoke(initial_state)
        except Exception as e:
            logger.error(f"ワークフロー実行中にエラーが発生しました: {e}")
            initial_state["error_message"] = str(e)
            initial_state["exit_code"] = _exit_code_for(e)
            return initial_state

        if final_state.get("processing_complete"):
            logger.info("処理が正常に完了しました")
            self._print_summary(final_state)
        else:
            logger.error(f"処理が失敗しました: {final_state.get('error_message', '不明なエラー')}")
        return final_state

    def _print_summary(self, final_state: LabState):
        """
        処理結果のサマリーを出力する

        Args:
            final_state: 最終処理状態
        """
        config: RunConfig = final_state["config"]
        payload = final_state["payload"]

        print("\n" + "=" * 50)
        print(f"🧲 ゼロモード検出ツール - {final_state['command']} 完了")
        print("=" * 50)
        print(f"🧮 磁場: {describe_source(config.source())}")
        print(f"📐 格子: L = {config.half_width}, N = {config.points_per_axis}")
        print(f"💾 出力: {final_state['run_dir']}")

        if "gauge" in payload:
            gauge = payload["gauge"]
            print(f"🌀 curl 残差: {gauge['curl_residual']:.3e} / div 残差: {gauge['div_residual']:.3e}")
        if "spectrum" in payload:
            spectrum = payload["spectrum"]
            print(f"📉 λ_min = {spectrum['lambda_min']:.6e}, nullity = {spectrum['nullity']}"
                  + ("（判定曖昧）" if spectrum["indeterminate"] else ""))
            print(f"📈 BS 局在最大固有値: {payload['birman_schwinger']['top']:.6f}")
        if "detections" in payload:
            detections = payload["detections"]
            print(f"🎯 検出数: {len(detections)}")
            for d in detections:
                mark = "✅" if d.consistent else "⚠️ "
                print(f"   {mark} t* = {d.t_star:.4f}（重複度 {d.multiplicity}）")
        if "perturbation" in payload:
            perturbation = payload["perturbation"]
            print(f"🎲 摂動 ε = {perturbation['epsilon']:.4g}: "
                  f"{perturbation['nullity_changed']}/{len(perturbation['reports'])} 試行で nullity が変化")
        if "suites" in payload:
            for result in payload["suites"]:
                print(f"   {'✅' if result.passed else '❌'} {result.name}: 最悪値 {result.worst:.3e}")

        print("=" * 50)
        print("✅ 処理が正常に完了しました！")


def _run(command: str, config: RunConfig) -> ResultRecord:
    state = ZeroModeLab(command, config=config).process()
    record = state.get("record")
    if record is None:
        record = ResultRecord(command=command, config=config.to_dict(), payload=state.get("payload", {}),
                              status="failed", error=state.get("error_message", ""),
                              exit_code=state.get("exit_code", 2))
    return record


def cmd_gauge(config: RunConfig) -> ResultRecord:
    """設定の磁場でゲージ再構成を検証する"""
    return _run("gauge", config)


def cmd_spectrum(config: RunConfig) -> ResultRecord:
    """1つの t でのスペクトル・nullity・BS 最大固有値"""
    return _run("spectrum", config)


def cmd_sweep(config: RunConfig) -> ResultRecord:
    """スイープ・検出・gnuplot スクリプト出力"""
    return _run("sweep", config)


def cmd_perturb(config: RunConfig) -> ResultRecord:
    """ランダム摂動の実験"""
    return _run("perturb", config)


def cmd_validate(config: RunConfig) -> ResultRecord:
    """性質検証スイート"""
    return _run("validate", config)


class _ArgumentParser(argparse.ArgumentParser):
    """引数の誤りを ConfigError として扱う"""

    def error(self, message):
        raise ConfigError(message, key="arguments")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(description='パウリ作用素ゼロモード検出ツール')
    parser.add_argument('command', choices=['gauge', 'spectrum', 'sweep', 'perturb', 'validate'],
                        help='サブコマンド')
    parser.add_argument('--config', help='YAML 設定ファイルのパス')
    parser.add_argument('--out', help='出力ディレクトリ')
    parser.add_argument('--grid', type=int, help='一辺の格子点数 N（8以上の偶数）')
    parser.add_argument('--box', type=float, help='箱の半幅 L')
    parser.add_argument('--t', dest='coupling', help='スイープ範囲 A:B:STEP または単一の t')
    parser.add_argument('--seed', type=int, help='乱数シード')
    parser.add_argument('--print-config', action='store_true', help='実効設定を出力して終了する')
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """コマンドライン引数を設定の上書き値に変換する"""
    overrides: Dict[str, Any] = {
        "output_dir": args.out,
        "points_per_axis": args.grid,
        "half_width": args.box,
        "seed": args.seed,
    }
    if args.coupling:
        overrides.update(parse_coupling(args.coupling))
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """メイン関数"""
    try:
        args = build_parser().parse_args(argv)
        overrides = overrides_from_args(args)

        if args.print_config:
            config = load_run_config(args.config, {**overrides, "command": args.command})
            sys.stdout.write(config.to_yaml())
            return 0

        state = ZeroModeLab(args.command, args.config, overrides).process()
        return 0 if state.get("processing_complete") else (state.get("exit_code") or 2)

    except ConfigError as e:
        logger.error(f"設定エラー: {e}")
        return 1
    except KeyboardInterrupt:
        logger.info("処理が中断されました")
        return 1
    except Exception as e:
        logger.error(f"予期しないエラーが発生しました: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
