"""Python face of the synthetic assignment pipeline.

The heavy lifting lives in the native _samkit extension; this package just
re-exports it. In a development tree the extension sits on sys.path next to
the build outputs rather than inside the package, hence the fallback import.
"""

try:
    from ._samkit import (
        SimilarityScore,
        WelchResult,
        __version__,
        build_mimicry_prompt,
        extract_synthetic,
        mae,
        parse_verdict,
        pcc,
        proportional_sample,
        protection_rate,
        sha256_hex,
        similarity,
        welch_t_test,
        word_count,
    )
except ImportError:
    from _samkit import (
        SimilarityScore,
        WelchResult,
        __version__,
        build_mimicry_prompt,
        extract_synthetic,
        mae,
        parse_verdict,
        pcc,
        proportional_sample,
        protection_rate,
        sha256_hex,
        similarity,
        welch_t_test,
        word_count,
    )

__all__ = [
    "SimilarityScore",
    "WelchResult",
    "__version__",
    "build_mimicry_prompt",
    "extract_synthetic",
    "mae",
    "parse_verdict",
    "pcc",
    "proportional_sample",
    "protection_rate",
    "sha256_hex",
    "similarity",
    "welch_t_test",
    "word_count",
]
