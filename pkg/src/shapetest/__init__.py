"""Bootstrap tests of shape restrictions for nonparametric regression.

The package tests monotonicity, convexity/concavity and their intersections
on a regression function estimated by B-spline series least squares. The test
statistic is a scaled Wald functional of the fit (an operator residual or a
cone distance), with critical values from a multiplier bootstrap whose draws
are recentered by a shape-enforced estimate.
"""

from .estimation import (
    BootstrapEnsemble,
    RankDeficientError,
    Sample,
    SeriesFit,
    eval_on_grid,
    fit,
    score_bootstrap,
)
from .functionals import (
    ConeDistance,
    OperatorResidual,
    ShapeSpec,
    UnsupportedShapeError,
    WaldFunctional,
    conforms_to_assumption1,
    evaluate,
    functional_for_shape,
)
from .grids import Grid, GridFunction, diff, norm
from .inference import (
    GammaRule,
    TestConfig,
    TestReport,
    TestStageError,
    critical_value,
    kappa_hat,
    run_test,
    theorem1_harness,
)
from .linprog import LinearProgram, LpSolution, LpStatus, NumericalFailure, solve
from .operators import (
    ShapeOperator,
    apply,
    gcm,
    gcm_1d,
    gcm_lp,
    lcm,
    rearrange,
    rearrange_1d,
)
from .simulation import (
    Design,
    McCell,
    McResult,
    alternative_design,
    draw_sample,
    null_design,
    results_to_csv,
    run_mc,
    theta0,
    write_hours_fixture,
)
from .splines import DegenerateSampleError, SplineBasis, build_basis, design_matrix

__version__ = "0.1.0"
