#![allow(dead_code)]

use mflab::func::UnitGroup;
use mflab::FunctionSpec;
use proptest::prelude::*;

/// Trial-division (ω, Ω, squarefree), kept independent of the library.
pub fn oracle(mut n: u64) -> (u8, u8, bool) {
    let (mut omega, mut big, mut squarefree) = (0u8, 0u8, true);
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            omega += 1;
            let mut k = 0;
            while n.is_multiple_of(p) {
                n /= p;
                k += 1;
            }
            big += k;
            squarefree &= k == 1;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        omega += 1;
        big += 1;
    }
    (omega, big, squarefree)
}

fn character() -> impl Strategy<Value = FunctionSpec> {
    (1u64..=30).prop_flat_map(|q| {
        let orders = UnitGroup::new(q).unwrap().generator_orders();
        orders
            .into_iter()
            .map(|o| 0..o)
            .collect::<Vec<_>>()
            .prop_map(move |index| FunctionSpec::character(q, index))
    })
}

pub fn leaf_spec() -> impl Strategy<Value = FunctionSpec> {
    prop_oneof![
        Just(FunctionSpec::Liouville),
        Just(FunctionSpec::Mobius),
        Just(FunctionSpec::One),
        character(),
        (1u32..=12).prop_map(FunctionSpec::RootOfUnity),
        (1u32..=12).prop_map(FunctionSpec::CompleteRootOfUnity),
        (-40.0f64..40.0).prop_map(FunctionSpec::Archimedean),
    ]
}

pub fn spec() -> impl Strategy<Value = FunctionSpec> {
    leaf_spec().prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.times(b)),
            (inner.clone(), 1u32..=4).prop_map(|(a, r)| a.power(r)),
            inner.prop_map(FunctionSpec::conjugate),
        ]
    })
}

/// Specs whose values are exact roots of unity or zero.
pub fn finite_spec() -> impl Strategy<Value = FunctionSpec> {
    spec().prop_filter("archimedean", |s| !s.to_json().contains("archimedean"))
}
