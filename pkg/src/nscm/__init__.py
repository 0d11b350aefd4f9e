"""nscm: entropy-loaded multi-rate Nyquist-SCM over dispersive IM/DD links.

Subpackages cover the sampled-signal primitives (`dsp`), probabilistic
shaping (`shaping`, `constellation`), the behavioral link model
(`linksim`), the per-band receiver (`rxchain`), the band planner
(`planner`) and the experiment harness (`metrics`, `experiment`, `cli`).
"""

from .waveform import ComplexWaveform, RealWaveform

__version__ = "0.1.0"

__all__ = ["ComplexWaveform", "RealWaveform", "__version__"]
