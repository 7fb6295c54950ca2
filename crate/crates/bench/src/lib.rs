//! Shared fixtures for the benchmarks.

use rvmlab_core::{Amplitude, FamilyKind, FamilySpec, FieldPair, MeridianDomain, MeridianGrid, MuFunction};

/// Square torus cross-section `[1, 2] × [0, 1]` with `n × n` nodes.
pub fn torus(n: usize) -> MeridianGrid {
    MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).expect("valid domain"), n, n).expect("valid grid")
}

/// Single-species ion family with the even profile.
pub fn ion_family(kind: FamilyKind, amp: Amplitude) -> FamilySpec {
    FamilySpec::single_ion(kind, MuFunction::even(1.0, 5.0).expect("valid profile"), amp)
}

/// Smooth nonzero potentials vanishing on the walls.
pub fn smooth_fields(grid: &MeridianGrid) -> FieldPair {
    let pi = std::f64::consts::PI;
    let mut f = FieldPair::zeros(grid);
    f.phi = grid.sample_interior(|r, z| 0.5 * (pi * (r - 1.0)).sin() * (pi * z).sin());
    f.a_phi = grid.sample_interior(|r, z| 0.2 * (pi * (r - 1.0)).sin() * (2.0 * pi * z).sin());
    f
}
