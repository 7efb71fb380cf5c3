"""Executable models of Hilbert algebras, their Gelfand triples and multipliers.

Modules
-------
graded
    Weighted index sets, seminorms, truncated elements and growth classes.
algebra
    Sequence and matrix algebra models, axiom verifier, duality extensions.
moyal
    Left/right multiplier membership, bounded elements and the trace.
opfamily
    Operator families, analysis/synthesis maps and transported algebras.
cli
    The ``moyalab run`` scenario runner.
"""
__version__ = "0.1.0"

from .algebra import (  # noqa: E402
    CorpusSpec,
    MatrixModel,
    PointwiseModel,
    check_hilbert_axioms,
    extend_involution,
    extend_product_left,
    extend_product_right,
    moyal_extend,
    moyal_extend_right,
    mutate,
)
from .envelope import EnvelopeClass, GrowthClass  # noqa: E402
from .graded import (  # noqa: E402
    GelfandTriple,
    GradedElement,
    GrowthClassifier,
    WeightSystem,
    classify,
    pairing,
    seminorm,
)
from .moyal import (  # noqa: E402
    is_bounded_element,
    is_left_moyal,
    is_moyal,
    is_right_moyal,
    trace_tauL,
)
from .opfamily import (  # noqa: E402
    OperatorFamily,
    OperatorFrame,
    build_random_tight,
    build_weyl_heisenberg,
    invol,
    parseval_check,
    phi,
    pi,
    representation_check,
    star,
    transported_model,
    verify_tightness,
)

__all__ = [name for name in dir() if not name.startswith("_")]
