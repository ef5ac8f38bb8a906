"""
BreathBFM Errors — ライブラリ全体の例外階層
CLI (main.py) だけがこれらをメッセージと終了コードに変換する。
"""


class BfmError(Exception):
    """BreathBFM の全例外の基底クラス"""


class InvalidAngleError(BfmError):
    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class DecompositionError(BfmError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class TruncatedReportError(BfmError):
    pass


class CaptureFormatError(BfmError):
    pass


class EmptyCaptureError(BfmError):
    def __init__(self, message: str, skip_reasons: dict[str, int] | None = None):
        reasons = skip_reasons or {}
        if reasons:
            detail = ", ".join(f"{k}={v}" for k, v in sorted(reasons.items()))
            message = f"{message} [{detail}]"
        super().__init__(message)
        self.skip_reasons = reasons


class FixtureParseError(BfmError):
    def __init__(self, message: str, line: int, field: str | None = None):
        where = f"line {line}" + (f", field '{field}'" if field else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.field = field


class ShapeError(BfmError):
    pass


class InsufficientDataError(BfmError):
    pass


class DegenerateError(BfmError):
    pass


class ConfigError(BfmError):
    pass


class AlignmentError(BfmError):
    pass


class SynthesisError(BfmError):
    pass


class WindowRangeError(BfmError):
    pass


class FrameRangeError(BfmError):
    pass
