"""Gender-occupation co-occurrence counting and bias metrics."""

from ._biasline import (  # noqa: F401
    AuthError,
    ConfigError,
    Error,
    IoError,
    Lexicon,
    amplification,
    analyze,
    classify_unit,
    count_documents,
    find_terms,
    load_lexicon,
    make_lexicon,
    pearson,
    regress,
    render_prompt,
    run_cli,
    scan,
    segment_sentences,
    sta,
    synth,
    tvd,
)

__version__ = "0.1.0"
