"""Application suites built on the certification protocol."""

from .mbqc import MeasurementPattern, delegated_soundness, induced_unitary, line_pattern, run_pattern
from .metrology import certified_qfi_bound, cramer_rao, ghz_certification, qfi
from .secret_sharing import AccessStructure, run_ss_variant, shamir_reconstruct, shamir_share
from .tdesign import certified_ensemble_fidelity, certify_ensemble, frame_potential
