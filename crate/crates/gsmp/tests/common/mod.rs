#![allow(dead_code)]

use gsmp::gsmp::GsmpWindow;
use gsmp::isospectral::{base_point, build_periodic, sample_torus, IsoPoint};
use gsmp::spectral_sets::{solve_potential, IntervalSystem, PotentialV};
use gsmp::workbench::Perturbation;

pub fn two_band() -> (IntervalSystem, PotentialV) {
    let e = IntervalSystem::from_bands(&[(-2.0, -1.0), (1.0, 2.0)]).unwrap();
    (e, PotentialV::new(2.0, 0.0, vec![(4.0, 0.0)]).unwrap())
}

/// Fixed finite-gap sets of genus 0..=4.
pub fn bands(g: usize) -> Vec<(f64, f64)> {
    match g {
        0 => vec![(-2.0, 2.0)],
        1 => vec![(-2.0, -1.0), (1.0, 2.0)],
        2 => vec![(-3.0, -2.0), (-1.0, 0.5), (1.0, 2.5)],
        3 => vec![(-3.0, -2.2), (-1.5, -0.5), (0.0, 0.8), (1.2, 2.5)],
        _ => vec![(-3.5, -2.6), (-2.0, -1.0), (-0.5, 0.3), (0.9, 1.6), (2.0, 3.0)],
    }
}

pub fn potential(g: usize) -> (IntervalSystem, PotentialV) {
    let e = IntervalSystem::from_bands(&bands(g)).unwrap();
    let v = solve_potential(&e, 1e-13, 200).unwrap();
    (e, v)
}

/// Torus points of the genus-`g` set, the base point first.
pub fn torus_points(g: usize, count: usize, seed: u64) -> (PotentialV, Vec<IsoPoint>) {
    let (_, v) = potential(g);
    let mut pts = vec![base_point(&v).unwrap()];
    if g > 0 {
        pts.extend(sample_torus(&v, count, seed, 1e-13).unwrap().points);
    }
    (v, pts)
}

pub fn periodic_window(g: usize, half_width: usize) -> (PotentialV, GsmpWindow) {
    let (_, v) = potential(g);
    let w = build_periodic(&base_point(&v).unwrap(), &v, half_width).unwrap();
    (v, w)
}

/// A periodic window of a torus point with a seeded decaying perturbation
/// on blocks `>= 1`.
pub fn perturbed_window(point: &IsoPoint, v: &PotentialV, half_width: usize, amp: f64, seed: u64) -> GsmpWindow {
    let w = build_periodic(point, v, half_width).unwrap();
    Perturbation::PowerDecay { exponent: 1.0, amplitude: amp, seed }.apply_certified(&w).unwrap()
}
