"""mixbench: complex-baseband simulator and virtual test bench for heterodyne
RF mixing modules."""

from .blocks import (
    AmpParams,
    AttenParams,
    BiasSetting,
    FilterParams,
    MixerParams,
    Predistorter,
    amplify,
    attenuate,
    lowpass,
    mixer_down,
    mixer_up,
)
from .budget import BudgetReport, ChainSpec, budget_report, cascade_gain, cascade_iip3, cascade_nf
from .calibrate import (
    NullResult,
    OptimizerConfig,
    ScanCalibration,
    calibrate_from_scan,
    design_predistorter,
    null_lo_blackbox,
    solve_null_closed_form,
)
from .loopback import (
    DownConverter,
    LoopbackConfig,
    ScanResult,
    UpConverter,
    composite_transfer,
    phase_scan,
    read_scan_csv,
    run_loopback,
    write_scan_csv,
)
from .metrics import (
    IqImbalanceEstimate,
    LinearityReport,
    ProbeConfig,
    amp_linearity,
    estimate_imbalance,
    linearity_report,
    measure_lo_leakage,
    measure_sideband_rejection,
    phase_linearity,
)
from .rb import (
    RbDataset,
    RbFit,
    fit_decay,
    gen_synthetic_rb,
    infidelity_to_p,
    process_infidelity,
    read_rb_csv,
    write_rb_csv,
)
from .signals import (
    Envelope,
    QuantizerSpec,
    ToneSpec,
    add_awgn,
    dbm_to_vpeak,
    quantize,
    single_bin_dft,
    synth_tone,
    vpeak_to_dbm,
)

__version__ = "0.1.0"
