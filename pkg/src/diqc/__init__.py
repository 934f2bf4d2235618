"""Device-independent certification of two-outcome qubit instruments.

The package turns Bell-test statistics into a lower bound on the fidelity
between an unknown measurement-and-output device and a target instrument
that interpolates between a projective measurement and the identity:

* ``matrixcore``: dense complex linear algebra (fidelities, spectra).
* ``quantum``: states, observables, instruments, extraction channels.
* ``bell``: the Bell expressions, their operators and local bounds.
* ``certify``: self-testing cutoffs and the fidelity pipeline.
* ``experiment``: exact noisy simulation and soundness oracle.
* ``cli``: the ``diqc`` command.
"""

from .matrixcore import (
    EigenResult,
    block_fidelity,
    hermitian_eig,
    kron,
    psd_sqrt,
    uhlmann_fidelity,
)
from .quantum import (
    DegenerateInstrumentError,
    DephasingChannel,
    DomainError,
    KrausInstrument,
    RegisterState,
    apply_instrument,
    apply_one_sided,
    bob_ideal_angle,
    dephasing_alice,
    dephasing_bob,
    ideal_settings,
    instrument_choi,
    partial_entangled_state,
    partial_trace,
    phi_plus,
    reference_instrument,
)
from .bell import (
    BellKind,
    CorrelatorTable,
    brute_force_local_bound,
    chsh_value,
    correlators_from_state,
    local_bound_new,
    new_bell_operator,
    new_bell_value,
    relabel_branch1,
    tilted_bell_value,
    tilted_local_bound,
    tilted_operator,
)
from .certify import (
    BETA_STAR,
    ChannelFamilyError,
    FidelityCertificate,
    LinearBoundCertificate,
    NonQuantumValueError,
    SymmetryViolationError,
    certify_instrument,
    combine_branches,
    find_cutoff,
    input_fidelity_bound,
    instrument_fidelity_bound,
    operator_margin,
    output_fidelity_bound,
    verify_branch1,
)
from .experiment import (
    NoiseModel,
    RunStatistics,
    cheating_run,
    end_to_end,
    noisy_instrument,
    noisy_source,
    oracle_choi_fidelity,
    simulate_run,
)

__version__ = "0.1.0"
