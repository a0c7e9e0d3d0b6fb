//! Ladder operators realized explicitly on the 3^N product space of N = 3
//! atoms. Checks the product rule used for regression seeds.

use blockade_ladder::ladder::{basis, generator_dim, ladder_generator, FlippingModel, LadderParams};
use blockade_ladder::linsys::{seed_regression, Label, C64};
use blockade_ladder::single_atom::RateParams;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const N: usize = 3;
const DIM: usize = 27;
const G: usize = 0;
const R: usize = 1;
const D: usize = 2;

fn index(levels: &[usize]) -> usize {
    levels.iter().rev().fold(0, |acc, &l| acc * 3 + l)
}

/// Configurations with `j` atoms in `g` and the rest in `d`.
fn ground_configs(j: usize) -> Vec<[usize; N]> {
    (0..1usize << N)
        .filter(|mask| mask.count_ones() as usize == j)
        .map(|mask| std::array::from_fn(|m| if mask >> m & 1 == 1 { G } else { D }))
        .collect()
}

fn ket(config: &[usize; N]) -> DVector<f64> {
    let mut v = DVector::zeros(DIM);
    v[index(config)] = 1.0;
    v
}

/// `|W_j^l⟩ = j^{−1/2} Σ_m |… r_m …⟩` over the atoms of `|G_j^l⟩` that are in `g`.
fn dicke(config: &[usize; N]) -> DVector<f64> {
    let atoms: Vec<usize> = (0..N).filter(|&m| config[m] == G).collect();
    let mut v = DVector::zeros(DIM);
    for &m in &atoms {
        let mut c = *config;
        c[m] = R;
        v[index(&c)] = 1.0 / (atoms.len() as f64).sqrt();
    }
    v
}

/// State vector for a ladder state name (`G0`, `Gj`, `Wj`) and manifold member `l`.
fn state(name: &str, config: &[usize; N]) -> DVector<f64> {
    if name.starts_with('G') { ket(config) } else { dicke(config) }
}

fn rung_of(name: &str) -> usize {
    name[1..].parse().unwrap()
}

/// `σ̃_{XY} = Σ_l |X^l⟩⟨Y^l|`
fn operator(label: &Label) -> DMatrix<f64> {
    let j = rung_of(&label.from);
    assert_eq!(j, rung_of(&label.to));
    ground_configs(j)
        .iter()
        .map(|c| state(&label.from, c) * state(&label.to, c).transpose())
        .fold(DMatrix::zeros(DIM, DIM), |acc, m| acc + m)
}

#[test]
fn product_rule_matches_matrix_products() {
    let b = basis(N);
    assert_eq!(b.len(), generator_dim(N));
    let ops: Vec<DMatrix<f64>> = b.labels().iter().map(operator).collect();
    for k in 0..b.len() {
        for l in 0..b.len() {
            let product = &ops[k] * &ops[l];
            let expected = match b.product(k, l) {
                Some(m) => ops[m].clone(),
                None => DMatrix::zeros(DIM, DIM),
            };
            assert!((product - expected).amax() < 1e-12, "{} · {}", b.label(k), b.label(l));
        }
    }
}

#[test]
fn populations_resolve_the_blockaded_subspace() {
    let b = basis(N);
    let total = b.population_indices().map(|k| operator(b.label(k))).fold(DMatrix::zeros(DIM, DIM), |a, m| a + m);
    // identity on span{G_j^l, W_j^l}: a projector of rank Σ_j 2 N_s[j] − 1 (G_0 has no W partner)
    assert!((&total * &total - &total).amax() < 1e-12);
    let expected_rank: usize = (0..=N).map(|j| ground_configs(j).len() * if j == 0 { 1 } else { 2 }).sum();
    assert!((total.trace() - expected_rank as f64).abs() < 1e-12);
}

#[test]
fn cross_rung_products_vanish() {
    for j1 in 1..=N {
        for j2 in (1..=N).filter(|&j| j != j1) {
            let a = operator(&Label::new(format!("G{j1}"), format!("W{j1}")));
            let b = operator(&Label::new(format!("W{j2}"), format!("G{j2}")));
            assert_eq!((a * b).amax(), 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Seeds `⟨A σ_k⟩` from the product rule equal `Tr(ρ A σ_k)` for a random ρ.
    #[test]
    fn seeds_match_traces(amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), DIM), j in 1usize..=N) {
        let psi = DVector::from_iterator(DIM, amps.iter().map(|&(re, im)| C64::new(re, im)));
        prop_assume!(psi.norm() > 1e-3);
        let psi = &psi / C64::new(psi.norm(), 0.0);
        let rho = &psi * psi.adjoint();
        let expect = |op: &DMatrix<f64>| (&rho * op.map(|x| C64::new(x, 0.0))).trace();

        let b = basis(N);
        let y = DVector::from_iterator(b.len(), b.labels().iter().map(|l| expect(&operator(l))));
        let p = LadderParams::new(N, RateParams::new(1.0, 1.0, 1.0, 30.0).unwrap(), FlippingModel::None).unwrap();
        let gen = ladder_generator(&p);
        let a = Label::new(format!("G{j}"), format!("W{j}"));
        let seed = seed_regression(&gen, &a, &y).unwrap();
        let op_a = operator(&a);
        for (k, label) in b.labels().iter().enumerate() {
            let direct = expect(&(&op_a * operator(label)));
            prop_assert!((seed[k] - direct).norm() < 1e-12, "{}", label);
        }
    }
}
