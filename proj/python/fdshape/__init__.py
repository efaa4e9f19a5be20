"""Fault detection filter synthesis by residual shaping.

Thin re-export of the compiled core. The heavy lifting (generalized plant
construction, the alternating matrix-inequality iteration, frequency-domain
measurement) lives in the C++ extension.
"""

try:
    from . import _fdshape as _core  # installed layout
except ImportError:
    import _fdshape as _core  # build-tree layout

ChannelSpan = _core.ChannelSpan
FdshapeError = _core.FdshapeError
GeneralizedPlant = _core.GeneralizedPlant
IterationRecord = _core.IterationRecord
ProblemFile = _core.ProblemFile
RationalTF = _core.RationalTF
StateSpace = _core.StateSpace
SynthesisConfig = _core.SynthesisConfig
SynthesisResult = _core.SynthesisResult
VerifyResult = _core.VerifyResult
build_fdi_plant = _core.build_fdi_plant
close_loop = _core.close_loop
hinf_norm = _core.hinf_norm
hminus_index = _core.hminus_index
load_problem = _core.load_problem
post_scale_update = _core.post_scale_update
problem_plant = _core.problem_plant
scale_output = _core.scale_output
synthesize = _core.synthesize
verify = _core.verify

__all__ = [
    "ChannelSpan",
    "FdshapeError",
    "GeneralizedPlant",
    "IterationRecord",
    "ProblemFile",
    "RationalTF",
    "StateSpace",
    "SynthesisConfig",
    "SynthesisResult",
    "VerifyResult",
    "build_fdi_plant",
    "close_loop",
    "hinf_norm",
    "hminus_index",
    "load_problem",
    "post_scale_update",
    "problem_plant",
    "scale_output",
    "synthesize",
    "verify",
]
