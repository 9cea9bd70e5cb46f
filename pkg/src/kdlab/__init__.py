"""kdlab: forward/reverse KL objectives, their target/non-target split, and toy studies."""

from .distributions import (
    BinaryMarginal,
    NonTargetDist,
    TeacherSpec,
    active_set_size,
    confidence,
    entropy,
    make_teacher,
    prob_vector,
    softmax,
    split_target,
)
from .gradients import (
    TargetGradReport,
    fd_gradient,
    grad_any,
    grad_drkl,
    grad_fkl,
    grad_norm_ratio,
    grad_rkl,
    grad_target_decomposed,
)
from .objectives import (
    Decomposition,
    ObjectiveSpec,
    decompose_rkl,
    drkl,
    evaluate,
    fkl,
    js,
    rkl,
    sfkl,
    srkl,
    sym_kl,
)

__version__ = "0.1.0"
