//! Shared fixtures for the benchmarks under `benches/`.

use ati_core::basis::{
    initial_state, solve_channel, BasisParams, ChannelEigensystem, GridLaw, HydrogenicSpec, RadialBasis,
};
use ati_core::propagator::{Propagator, WavefunctionState};

/// H(1s) on the default radial basis (400 a.u., 300 breakpoints, order 7).
pub struct Fixture {
    pub spec: HydrogenicSpec,
    pub basis: RadialBasis,
    pub eigensystems: Vec<ChannelEigensystem>,
    pub l_max: usize,
}

impl Fixture {
    pub fn new(l_max: usize) -> Self {
        let basis = RadialBasis::build(BasisParams {
            box_radius: 400.0,
            breakpoints: 300,
            spline_order: 7,
            grid: GridLaw::QuadraticLinear { inner_radius: 30.0 },
        })
        .expect("default basis");
        let spec = HydrogenicSpec::new(1, 1, 0).expect("hydrogen 1s");
        let eigensystems = (0..=l_max)
            .map(|l| solve_channel(&basis, &spec, l).expect("eigensystem"))
            .collect();
        Self {
            spec,
            basis,
            eigensystems,
            l_max,
        }
    }

    pub fn initial(&self) -> WavefunctionState {
        let (_, coeffs) = initial_state(&self.eigensystems[0], &self.spec).expect("initial state");
        WavefunctionState::from_channel(self.l_max, self.basis.n_basis(), 0, &coeffs)
    }

    pub fn propagator(&self, dt: f64) -> Propagator {
        Propagator::new(&self.basis, self.spec.charge(), self.l_max, dt).expect("propagator")
    }
}
