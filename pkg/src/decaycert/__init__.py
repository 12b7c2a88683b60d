"""Certify decay envelopes ``g(t) <= 1/mu(t)`` for ``g' <= -gamma g + alpha(t, g) + beta``."""

from .discrete import (
    DiscreteEnvelope, DiscreteProblem, IndexedSequence, PreconditionError, RecurrenceResult, discrete_residual,
    run_recurrence, unit_step_view, verify_discrete_certificate,
)
from .expr import (
    DomainError, Expression, ExpressionError, NonDifferentiableError, ParseError, UnknownVariableError, diff_expr,
    eval_expr, parse_expr,
)
from .inequality import (
    CertificateReport, ContinuousProblem, Envelope, NonpositiveEnvelopeError, Verdict, check_alpha_assumptions,
    condition_residual, envelope_bound, log_grid, verify_certificate,
)
from .ode import Status, Trajectory, check_envelope, integrate_extremal, integrate_scalar
from .reduction import (
    AsymmetryError, DimensionError, VectorSystem, build_example2, check_gdot_decay, example2_system,
    falsify_alpha_bound, integrate_vector, jacobi_eigenvalues, min_eigenvalue, reduce_to_scalar,
)
from .search import (
    EnvelopeFamily, FeasibleRegion, NoSignChangeError, PowerLawShape, WrongShapeError, powerlaw_closed_form_check,
    refine_boundary, search_feasible,
)

__version__ = "0.1.0"
