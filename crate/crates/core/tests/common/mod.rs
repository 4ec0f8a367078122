#![allow(dead_code)]

use ddctl_core::lti::{ChannelSpec, Exosystem, SineInputSpec, SineTerm, StateSpace};
use ddctl_core::numkit::{Mat, Vector};

pub fn reactor() -> StateSpace {
    let a = Mat::from_row_slice(
        4,
        4,
        &[
            1.38, -0.2077, 6.715, -5.676, -0.5814, -4.29, 0.0, 0.675, 1.067, 4.273, -6.654, 5.893, 0.048, 4.273, 1.343,
            -2.104,
        ],
    );
    let b = Mat::from_row_slice(4, 2, &[0.0, 0.0, 5.679, 0.0, 1.136, -3.146, 1.136, 0.0]);
    let c = Mat::from_row_slice(2, 4, &[1.0, 0.0, 1.0, -1.0, 0.0, 1.0, 0.0, 0.0]);
    StateSpace::strictly_proper(a, b, c).unwrap()
}

pub fn reactor_lambda() -> (Mat, Vector) {
    (Mat::from_diagonal(&Vector::from_vec(vec![-4.0, -8.0])), Vector::from_vec(vec![1.0, 2.0]))
}

fn channel(freqs: &[f64], amp: f64) -> ChannelSpec {
    ChannelSpec {
        bias: 0.0,
        terms: freqs
            .iter()
            .enumerate()
            .map(|(i, &w)| SineTerm { amplitude: amp, frequency: w, phase: 0.7 * i as f64 })
            .collect(),
    }
}

pub fn reactor_excitation() -> SineInputSpec {
    SineInputSpec { channels: vec![channel(&[3.0, 7.0, 13.0, 21.0], 1.0), channel(&[5.0, 10.0, 17.0, 25.0], 1.0)] }
}

pub fn vessel() -> (StateSpace, Exosystem) {
    let a = Mat::from_row_slice(
        6,
        6,
        &[
            -0.1, 0.012, 0.015, 0.0, 0.0, 0.01, //
            0.01, -0.0333, -0.05, 0.0, 0.0, -0.014, //
            0.02, 0.03, -0.18, 0.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
        ],
    );
    let b = Mat::from_row_slice(
        6,
        3,
        &[0.0, 0.03, 0.025, 0.0, 0.21, -0.2, 0.1, 0.03, 0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    );
    let p = Mat::from_row_slice(
        6,
        3,
        &[-0.001, 0.0, 0.002, 0.02, 0.01, -0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 0.1, -0.1],
    );
    let mut c = Mat::zeros(3, 6);
    for i in 0..3 {
        c[(i, 3 + i)] = 1.0;
    }
    let w = std::f64::consts::PI / 5.0;
    let s = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -w * w, 0.0]);
    let q = Mat::from_row_slice(3, 3, &[2.0, 0.0, 2.0 / (w * w), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    (StateSpace::strictly_proper(a, b, c).unwrap(), Exosystem::new(s, p, q).unwrap())
}

pub fn vessel_lambda() -> (Mat, Vector) {
    (Mat::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -2.0]), Vector::from_vec(vec![0.0, 0.5]))
}

pub fn vessel_excitation() -> SineInputSpec {
    SineInputSpec {
        channels: vec![
            channel(&[0.31, 0.93, 1.71, 2.93], 1.0),
            channel(&[0.47, 1.13, 2.11, 3.31], 1.0),
            channel(&[0.55, 1.37, 2.53, 3.73], 1.0),
        ],
    }
}
