//! Random small ring elements shared by the property and acceptance tests.
#![allow(dead_code)]

use flatstruct::ring::{rat, Poly, Ring, RingElem};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed};

pub fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(0x5eed_f1a7),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn klein_ring() -> Ring {
    Ring::new(vec![rat(2, 7), rat(3, 7), rat(1, 1)])
}

/// `t2 + t1 z + z^4 = 0`.
pub fn quartic_ring() -> Ring {
    let n = 3;
    let rel = Poly::var(n, 1)
        .add(&Poly::var(n, 0).mul(&Poly::var(n, 3)))
        .add(&Poly::var(n, 3).pow(4));
    Ring::with_extension(vec![rat(3, 5), rat(4, 5), rat(1, 1)], "z", rat(1, 5), rel).unwrap()
}

pub type Term = (i64, i64, [u32; 3], u32);

pub fn terms() -> impl Strategy<Value = Vec<Term>> {
    prop::collection::vec(
        (
            -6i64..=6,
            1i64..=4,
            [0u32..=3, 0u32..=3, 0u32..=2],
            0u32..=4,
        ),
        0..5,
    )
}

pub fn build(ring: &Ring, terms: &[Term]) -> RingElem {
    let mut f = ring.zero();
    for (num, den, e, ze) in terms {
        let mut m = ring.constant(rat(*num, *den));
        for (i, &k) in e.iter().enumerate() {
            m = m.mul(&ring.var(i).pow(k));
        }
        if let Some(z) = ring.gen() {
            m = m.mul(&z.pow(*ze));
        }
        f = f.add(&m);
    }
    f
}

pub fn point() -> impl Strategy<Value = [f64; 4]> {
    [0.2f64..1.5, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0]
}

pub fn close(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-12 * (1.0 + a.norm().max(b.norm()))
}

pub fn rings() -> [Ring; 2] {
    [klein_ring(), quartic_ring()]
}
