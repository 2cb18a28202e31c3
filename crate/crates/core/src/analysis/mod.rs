//! Numerical checks built on the solver: level curves, functional
//! inequalities, symmetrization and surgery.

pub mod fields;
pub mod inequalities;
pub mod level;
pub mod surgery;
pub mod symmetry;
pub mod verify;

pub use fields::{random_field, random_mesh_field, random_radial_field, SMOOTHING_PASSES};
pub use inequalities::{
    apriori_sample, decay_check, gagliardo_nirenberg_ratio, poincare_remainder, sup_gradient_ratio,
    weighted_remainder, AprioriSample, Decay, Remainder,
};
pub use level::{
    compare_rooted_unrooted, detect_threshold, level_sweep, mu_star_detect, radial_correspondence,
    truncation_monotonicity, LevelCurve, LevelDiagnostics, LevelPoint, MuStar, RadialCorrespondence,
    RootedUnrootedComparison, SweepSetup, ThresholdSearch,
};
pub use surgery::{surgery_duplicate, surgery_identities, Surgery, SurgeryIdentities};
pub use symmetry::{matching_grid, symmetrize, symmetrize_check, SymmetrizeCheck};
pub use verify::{run_suite, Suite, VerifyCheck, VerifyConfig, VerifyEnvironment, VerifyReport};
