"""
BreathBFM Main CLI — 全モジュール統合
Usage:
  python main.py estimate --input cap.jsonl                        # 全窓の呼吸数推定 (JSON)
  python main.py estimate --input cap.pcap --csv --out rows.csv     # 窓ごとの CSV
  python main.py estimate --input cap.jsonl --truth cap.jsonl.scenario.json
  python main.py synth --rate 15 --out cap.jsonl                   # 合成キャプチャ生成
  python main.py decode --input golden.pcap --frame 0              # BFM の展開ダンプ
  python main.py spectrum --input cap.jsonl --window-start 0       # プロット用スペクトル CSV
  python main.py pca --input cap.jsonl --window-start 0            # 主成分スコアと寄与率
  python main.py sweep --ratios 10,1,0.1 --seeds 1,2,3,4,5         # SNR スイープ

標準出力には結果だけを書き、診断は標準エラーに出す。
終了コード: 0 = 成功, 1 = 入力・設定エラー, 2 = ファイル I/O エラー
"""
import argparse
import json
import os
import sys

import numpy as np
import pandas as pd

import config
from bfm_codec import orthonormality_residual, reconstruct_batch
from capture_ingest import parse_mac, read_capture
from errors import BfmError, ConfigError, DegenerateError, FrameRangeError, InsufficientDataError
from respiration import FLAG_LOW_CONF, PipelineConfig, rmse, sliding_estimate, trace_at
from synth import BreathingScenario, generate_capture, ground_truth, read_scenario, sweep_snr

QUIET = False

ESTIMATE_COLUMNS = ["window_start", "detected", "rate", "ratio", "flags", "n_frames"]

# CLI フラグ → PipelineConfig のフィールド
PIPELINE_FLAGS = {
    "window": "window_length",
    "step": "window_step",
    "interp": "interp_interval",
    "band_low": "band_low",
    "band_high": "band_high",
    "theta": "theta",
    "taper": "taper",
    "zero_pad": "zero_pad",
}


def log(msg: str):
    if not QUIET:
        print(msg, file=sys.stderr, flush=True)


# ═══════════════════════════════════════════
#  1. 共通ヘルパー
# ═══════════════════════════════════════════
def _pipeline_config(args) -> PipelineConfig:
    overrides = {key: getattr(args, flag) for flag, key in PIPELINE_FLAGS.items()}
    return PipelineConfig.from_sources(args.config, overrides)


def _load_stream(args):
    sources = {parse_mac(m) for m in args.src} if args.src else None
    dests = {parse_mac(m) for m in args.dst} if args.dst else None
    stream = read_capture(args.input, args.format, sources=sources, dests=dests)
    log(f"[READ] {args.input}: {stream.parsed} frames, duration {stream.effective_duration():.1f}s")
    if stream.skipped:
        detail = ", ".join(f"{k}={v}" for k, v in sorted(stream.skip_reasons.items()))
        log(f"[SKIP] {stream.skipped} packets skipped ({detail})")
    if stream.trailing_bits:
        log(f"[WARN] {stream.trailing_bits} trailing bits ignored")
    return stream


def _load_truth(path: str, cfg: PipelineConfig) -> list[tuple[float, float]]:
    """シナリオのサイドカー JSON か window_start,rate 列を持つ CSV"""
    if path.lower().endswith(".json"):
        return ground_truth(read_scenario(path), cfg)
    try:
        df = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise ConfigError(f"{path}: unreadable truth CSV ({e})")
    missing = {"window_start", "rate"} - set(df.columns)
    if missing:
        raise ConfigError(f"{path}: truth CSV is missing column(s) {sorted(missing)}")
    try:
        return list(zip(df["window_start"].astype(float), df["rate"].astype(float)))
    except ValueError as e:
        raise ConfigError(f"{path}: truth CSV has a non-numeric value ({e})")


def _to_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def _to_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, lineterminator="\n")


def _emit(text: str, out: str | None):
    """全処理が成功してから 1 回だけ書く"""
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        log(f"[DONE] wrote {out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _parse_list(raw: str, kind, name: str) -> list:
    try:
        values = [kind(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--{name}: expected a comma-separated list (got {raw!r})")
    if not values:
        raise ConfigError(f"--{name}: empty list")
    return values


def _scenario(args) -> BreathingScenario:
    values = {
        "rate": args.rate,
        "duration": args.duration,
        "feedback_interval_mean": args.interval,
        "feedback_interval_jitter": args.jitter,
        "breathing_gain": args.gain,
        "noise_sigma": args.noise,
        "seed": args.seed,
    }
    if args.dims:
        dims = _parse_list(args.dims, int, "dims")
        if len(dims) != 3:
            raise ConfigError(f"--dims: expected n_rows,n_cols,n_subcarriers (got {args.dims!r})")
        values.update(n_rows=dims[0], n_cols=dims[1], n_subcarriers=dims[2])
    if args.preset:
        if args.preset in config.QUANT_PRESETS:
            b_psi, b_phi = config.QUANT_PRESETS[args.preset]
        else:
            pair = _parse_list(args.preset, int, "preset")
            if len(pair) != 2:
                raise ConfigError(f"--preset: expected a preset name or b_psi,b_phi (got {args.preset!r})")
            b_psi, b_phi = pair
        values.update(b_psi=b_psi, b_phi=b_phi)
    return BreathingScenario(**{k: v for k, v in values.items() if v is not None})


# ═══════════════════════════════════════════
#  2. サブコマンド
# ═══════════════════════════════════════════
def cmd_estimate(args) -> int:
    """全窓の呼吸数推定"""
    cfg = _pipeline_config(args)
    stream = _load_stream(args)
    estimates = sliding_estimate(stream, cfg, workers=args.workers, verbose=not QUIET)
    if not estimates:
        log(f"[WARN] capture is shorter than one {cfg.window_length:g}s window")

    err = None
    if args.truth:
        err = rmse(estimates, _load_truth(args.truth, cfg))
        log(f"[DONE] RMSE {err:.3f} breaths/minute over {len(estimates)} windows")

    rows = [e.to_dict() for e in estimates]
    if args.csv:
        text = _to_csv(pd.DataFrame(rows, columns=ESTIMATE_COLUMNS))
    else:
        metadata = stream.metadata()
        metadata["low_confidence_windows"] = [e.window_start for e in estimates if FLAG_LOW_CONF in e.flags]
        text = _to_json({
            "config": cfg.to_dict(),
            "stream": metadata,
            "windows": rows,
            "rmse": err,
        })
    _emit(text, args.out)
    return 0


def cmd_synth(args) -> int:
    """合成キャプチャとサイドカー JSON を書き出す"""
    if not args.out:
        raise ConfigError("synth needs --out")
    fmt = args.format
    if fmt == "auto":
        fmt = "pcap" if os.path.splitext(args.out)[1].lower() in (".pcap", ".cap") else "fixture"
    scenario = _scenario(args)
    stream = generate_capture(scenario, out_path=args.out, fmt=fmt, verbose=not QUIET)
    log(f"[DONE] wrote {args.out} ({fmt}, {len(stream.records)} frames)")
    return 0


def cmd_decode(args) -> int:
    """1 フレームの全サブキャリアの V を JSON でダンプする"""
    stream = _load_stream(args)
    n = len(stream.records)
    if not 0 <= args.frame < n:
        raise FrameRangeError(f"frame index {args.frame} out of range (capture has {n} frames)")
    rec = stream.records[args.frame]
    v = reconstruct_batch(rec.n_rows, rec.n_cols, rec.phi_indices, rec.psi_indices, rec.config)

    def _clean(x):
        return (np.round(x, 12) + 0.0).tolist()

    text = _to_json({
        "frame": args.frame,
        "timestamp": rec.timestamp,
        "n_rows": rec.n_rows,
        "n_cols": rec.n_cols,
        "b_phi": rec.config.b_phi,
        "b_psi": rec.config.b_psi,
        "n_subcarriers": rec.n_subcarriers,
        "max_residual": orthonormality_residual(v),
        "subcarriers": [
            {
                "index": s,
                "phi": rec.phi_indices[s].tolist(),
                "psi": rec.psi_indices[s].tolist(),
                "real": _clean(v[s].real),
                "imag": _clean(v[s].imag),
            }
            for s in range(rec.n_subcarriers)
        ],
    })
    _emit(text, args.out)
    return 0


def cmd_spectrum(args) -> int:
    """window_start の窓の |DFT| (bpm, magnitude) を CSV で出す"""
    cfg = _pipeline_config(args)
    stream = _load_stream(args)
    trace = trace_at(stream, cfg, args.window_start)
    spectrum = trace.filtered if args.band_passed else trace.spectrum
    if spectrum is None:
        raise InsufficientDataError(
            f"window {args.window_start:g} has {trace.estimate.n_frames} frames; no spectrum"
        )
    if trace.estimate.flags:
        log(f"[WARN] window flags: {'|'.join(trace.estimate.flags)}")
    df = pd.DataFrame({"bpm": spectrum.frequencies, "magnitude": spectrum.magnitudes})
    _emit(_to_csv(df), args.out)
    return 0


def cmd_pca(args) -> int:
    """上位 --components 個の主成分スコアの時系列と寄与率"""
    if args.components < 1:
        raise ConfigError(f"--components must be >= 1 (got {args.components})")
    cfg = _pipeline_config(args)
    stream = _load_stream(args)
    trace = trace_at(stream, cfg, args.window_start)
    if trace.principal is None:
        flags = "|".join(trace.estimate.flags)
        if "degenerate" in trace.estimate.flags:
            raise DegenerateError(f"window {args.window_start:g} has constant features ({flags})")
        raise InsufficientDataError(f"window {args.window_start:g} has no principal component ({flags})")

    times = trace.timestamps
    scores = trace.principal.component_scores[:, :args.components]
    rates = trace.principal.contribution_rates[:args.components].tolist()
    log(f"[DONE] contribution rate of component 1: {rates[0]:.4f}")

    if args.csv:
        columns = {"t": times, "score": scores[:, 0]}
        columns.update({f"score_{k + 1}": scores[:, k] for k in range(1, scores.shape[1])})
        text = _to_csv(pd.DataFrame(columns))
    else:
        text = _to_json({
            "window_start": args.window_start,
            "contribution_rates": rates,
            "t": times.tolist(),
            "score": scores[:, 0].tolist(),
            "component_scores": scores.T.tolist(),
        })
    _emit(text, args.out)
    return 0


def cmd_sweep(args) -> int:
    """breathing_gain / noise_sigma 比ごとの RMSE 表"""
    cfg = _pipeline_config(args)
    ratios = _parse_list(args.ratios, float, "ratios")
    seeds = _parse_list(args.seeds, int, "seeds")
    base = _scenario(args)
    rows = sweep_snr(ratios, seeds, base, cfg, workers=args.workers, verbose=not QUIET)
    df = pd.DataFrame(rows, columns=["ratio", "seed", "rmse"])
    for ratio, group in df.groupby("ratio", sort=False):
        log(f"[DONE] ratio {ratio:g}: mean RMSE {group['rmse'].mean():.3f}")
    _emit(_to_csv(df), args.out)
    return 0


# ═══════════════════════════════════════════
#  3. 引数
# ═══════════════════════════════════════════
def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--quiet", action="store_true", help="[ERROR] 以外の診断を出さない")
    p.add_argument("--out", type=str, default=None, help="出力ファイル (default: 標準出力)")
    return p


def _input_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--input", type=str, required=True, help="pcap またはフィクスチャ")
    p.add_argument("--format", choices=["auto", "pcap", "fixture"], default="auto",
                   help="入力形式 (default: 拡張子で判定)")
    p.add_argument("--src", action="append", default=None, help="送信元 MAC で絞り込み (複数可)")
    p.add_argument("--dst", action="append", default=None, help="宛先 MAC で絞り込み (複数可)")
    return p


def _pipeline_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=str, default=None, help="JSON 設定ファイル")
    p.add_argument("--window", type=float, default=None, help=f"窓長 秒 (default: {config.WINDOW_LENGTH:g})")
    p.add_argument("--step", type=float, default=None, help=f"窓のずらし幅 秒 (default: {config.WINDOW_STEP:g})")
    p.add_argument("--interp", type=float, default=None, help=f"補間間隔 秒 (default: {config.INTERP_INTERVAL:g})")
    p.add_argument("--band-low", type=float, default=None, help=f"帯域下限 bpm (default: {config.BAND_LOW:g})")
    p.add_argument("--band-high", type=float, default=None, help=f"帯域上限 bpm (default: {config.BAND_HIGH:g})")
    p.add_argument("--theta", type=float, default=None, help=f"検出しきい値 (default: {config.THETA:g})")
    p.add_argument("--taper", type=str, default=None, help="scipy.signal の窓関数名 (default: なし)")
    p.add_argument("--zero-pad", type=int, default=None, help="ゼロ詰め倍率 (default: 1)")
    p.add_argument("--workers", type=int, default=None, help=f"並列ワーカー数 (default: {config.MAX_WORKERS})")
    return p


def _scenario_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--rate", type=float, default=None, help="呼吸数 bpm (default: 15, 0 = 息止め)")
    p.add_argument("--duration", type=float, default=None, help=f"秒 (default: {config.CAPTURE_DURATION:g})")
    p.add_argument("--interval", type=float, default=None, help=f"平均フィードバック間隔 秒 (default: {config.FEEDBACK_INTERVAL:g})")
    p.add_argument("--jitter", type=float, default=None, help=f"間隔の揺らぎ ± 秒 (default: {config.SYNTH_JITTER:g})")
    p.add_argument("--gain", type=float, default=None, help=f"呼吸摂動の大きさ (default: {config.SYNTH_BREATHING_GAIN:g})")
    p.add_argument("--noise", type=float, default=None, help=f"雑音の大きさ (default: {config.SYNTH_NOISE_SIGMA:g})")
    p.add_argument("--seed", type=int, default=None, help=f"乱数シード (default: {config.SYNTH_SEED})")
    p.add_argument("--dims", type=str, default=None, help="n_rows,n_cols,n_subcarriers (default: 4,4,250)")
    p.add_argument("--preset", type=str, default=None, help="su-low | su-high | mu-low | mu-high | b_psi,b_phi")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="BreathBFM — ビームフォーミングフィードバックからの呼吸数推定",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command")
    common, inp, pipe, scen = _common_parser(), _input_parser(), _pipeline_parser(), _scenario_parser()

    p_est = sub.add_parser("estimate", parents=[common, inp, pipe], help="全窓の呼吸数推定")
    p_est.add_argument("--truth", type=str, default=None, help="正解 (シナリオ JSON または window_start,rate CSV)")
    fmt = p_est.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON レポート (default)")
    fmt.add_argument("--csv", action="store_true", help="窓ごとの CSV")

    p_synth = sub.add_parser("synth", parents=[common, scen], help="合成キャプチャ生成")
    p_synth.add_argument("--format", choices=["auto", "pcap", "fixture"], default="auto",
                         help="出力形式 (default: 拡張子で判定)")

    p_dec = sub.add_parser("decode", parents=[common, inp], help="1 フレームの BFM ダンプ")
    p_dec.add_argument("--frame", type=int, default=0, help="フレーム番号 (0 始まり)")

    p_spec = sub.add_parser("spectrum", parents=[common, inp, pipe], help="1 窓のスペクトル CSV")
    p_spec.add_argument("--window-start", type=float, default=0.0, help="窓の開始時刻 秒")
    p_spec.add_argument("--band-passed", action="store_true", help="帯域外を 0 にした値を出す")

    p_pca = sub.add_parser("pca", parents=[common, inp, pipe], help="1 窓の第 1 主成分")
    p_pca.add_argument("--window-start", type=float, default=0.0, help="窓の開始時刻 秒")
    p_pca.add_argument("--components", type=int, default=10, help="出力する主成分 (スコアと寄与率) の数")
    p_pca.add_argument("--csv", action="store_true", help="t,score の CSV だけを出す")

    p_sweep = sub.add_parser("sweep", parents=[common, pipe, scen], help="SNR スイープ")
    p_sweep.add_argument("--ratios", type=str, default="10,1,0.1", help="gain/noise 比のリスト")
    p_sweep.add_argument("--seeds", type=str, default="1,2,3,4,5", help="シードのリスト")
    return parser


COMMANDS = {
    "estimate": cmd_estimate,
    "synth": cmd_synth,
    "decode": cmd_decode,
    "spectrum": cmd_spectrum,
    "pca": cmd_pca,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    global QUIET
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 0
    QUIET = args.quiet
    try:
        return COMMANDS[args.command](args)
    except BfmError as e:
        print(f"[ERROR] {e}", file=sys.stderr, flush=True)
        return 1
    except OSError as e:
        print(f"[ERROR] {e}", file=sys.stderr, flush=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
