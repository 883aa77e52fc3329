//! Acceptance suite: one PASS/FAIL line per criterion, each with its
//! runtime limit. Exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fractal_spectra::carpets::{
    assouad_curve, carpet_dimensions, distinguish, lower_curve, max_column_word, CarpetOracle, CarpetSpec,
};
use fractal_spectra::moran::{
    assouad_spectrum_trunc, invert, lower_spectrum_trunc, recipe_sequence, window_counts, Branching,
    ContractionSeq, MoranSpec,
};
use fractal_spectra::percolation::{
    binomial_pmf, box_dimension, empirical_spectrum_mc, exact_gw_distribution, gw_moment_table, pmf_moment,
    OffspringMoments, PercolationParams,
};
use fractal_spectra::selfsimilar::{gibbs_mass, similarity_exponent, stopping_set, SimilarIfs, DEFAULT_TOL};
use fractal_spectra::spectrum::{
    check_curve, detect_transitions, empirical_spectrum, DimensionSummary, SpectrumKind, TailWindow, ThetaGrid,
};
use fractal_spectra::tail_density::{
    asymptotic_densities, check_taildensity_props, complement_identity, exact_limits, random_windows,
    tail_densities, IntegerSet,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

/// Number, name, runtime limit and check.
type Criterion = (u32, &'static str, Duration, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn two_by_three() -> CarpetSpec {
    CarpetSpec::from_columns(2, 3, &[&[0, 2], &[1]]).unwrap()
}

fn carpet_closed_forms() -> Check {
    let spec = two_by_three();
    let d = carpet_dimensions(&spec);
    let (l2, l3) = (2f64.ln(), 3f64.ln());
    let dim_a = 1.0 + l2 / l3;
    let dim_b = 1.0 + (3.0f64 / 2.0).ln() / l3;
    ensure!((d.assouad - dim_a).abs() <= 1e-12, "dim_A {} vs {dim_a}", d.assouad);
    ensure!((d.upper_box - dim_b).abs() <= 1e-12, "dim_B {} vs {dim_b}", d.upper_box);
    ensure!((d.lower_box - dim_b).abs() <= 1e-12, "lower box {} vs {dim_b}", d.lower_box);
    ensure!((d.lower - 1.0).abs() <= 1e-12, "dim_L {} vs 1", d.lower);
    let grid = ok(ThetaGrid::uniform(2000))?;
    let curve = ok(assouad_curve(&spec, &grid))?;
    let found = detect_transitions(&curve, 1, 1e-4);
    let target = l2 / l3;
    ensure!(found.len() == 1, "expected one transition, found {found:?}");
    let err = (found[0] - target).abs();
    ensure!(err <= grid.max_step(), "transition {} off by {err}", found[0]);
    Ok(format!("dim_A, dim_B, dim_L exact to 1e-12; transition {:.6} (log2/log3 = {target:.6})", found[0]))
}

fn oracle_equivalence() -> Check {
    let spec = two_by_three();
    let theta = 0.5;
    let oracle = CarpetOracle::new(spec.clone());
    let scales: Vec<f64> = (8..=16).map(|k| 2f64.powi(-k)).collect();
    let word = max_column_word(&spec);
    let est = ok(empirical_spectrum(&oracle, theta, &scales, &[word]))?;
    // Closed form at θ = 1/2 for this carpet, evaluated independently.
    let (l2, l3) = (2f64.ln(), 3f64.ln());
    let b = 1.0 + (1.5f64).ln() / l3;
    let expected = (b - theta * ((1.5f64).ln() / l2 + l2 / l3)) / (1.0 - theta);
    ensure!((expected - 1.5222).abs() < 1e-4, "closed form {expected}");
    let err = (est.slope - expected).abs();
    ensure!(err <= 0.05, "slope {} vs {expected} (error {err})", est.slope);
    Ok(format!("slope {:.4} vs closed form {expected:.4}", est.slope))
}

fn equal_dimension_pair() -> Check {
    let a = CarpetSpec::from_columns(5, 6, &[&[0, 2, 4], &[], &[0, 2], &[], &[0]]).unwrap();
    let evens: Vec<u32> = (0..9).map(|k| 2 * k).collect();
    let b = CarpetSpec::from_columns(5, 36, &[&evens, &[], &[0, 2], &[], &[0]]).unwrap();
    let (da, db) = (carpet_dimensions(&a), carpet_dimensions(&b));
    for (name, x, y) in [
        ("dim_A", da.assouad, db.assouad),
        ("dim_B", da.upper_box, db.upper_box),
        ("dim_L", da.lower, db.lower),
    ] {
        ensure!((x - y).abs() <= 1e-12, "{name} differs: {x} vs {y}");
    }
    let dist = ok(distinguish(&a, &b, &ThetaGrid::default()))?;
    ensure!(dist.assouad > 0.01, "assouad sup-distance {}", dist.assouad);
    Ok(format!("dims equal; assouad spectra differ by {:.4}", dist.assouad))
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `P(Y_2 = j)` for offspring Binomial(2, 4/5), by summing over `Y_1`.
fn second_generation_pmf() -> Vec<f64> {
    let off = [0.04, 0.32, 0.64];
    let mut out = vec![0.0; 5];
    for (y1, &p1) in off.iter().enumerate() {
        // Convolution of y1 independent copies.
        let mut conv = vec![1.0];
        for _ in 0..y1 {
            let mut next = vec![0.0; conv.len() + 2];
            for (i, &c) in conv.iter().enumerate() {
                for (j, &q) in off.iter().enumerate() {
                    next[i + j] += c * q;
                }
            }
            conv = next;
        }
        for (j, &c) in conv.iter().enumerate() {
            out[j] += p1 * c;
        }
    }
    out
}

fn gw_moments() -> Check {
    let pmf = ok(binomial_pmf(2, &rat(4, 5)))?;
    let moments = ok(OffspringMoments::from_pmf(&pmf, 5))?;
    let table = ok(gw_moment_table(&moments, 5))?;
    let mut worst = 0.0f64;
    for depth in 0..=5usize {
        let dist = ok(exact_gw_distribution(&pmf, depth))?;
        for k in 1..=5usize {
            let exact = pmf_moment(&dist, k as u32).to_f64().unwrap();
            let got = ok(table.moment_f64(k, depth as u32))?;
            worst = worst.max((got - exact).abs() / exact);
        }
    }
    ensure!(worst <= 1e-9, "worst relative error {worst}");
    let y2 = second_generation_pmf();
    let second: f64 = y2.iter().enumerate().map(|(j, p)| (j * j) as f64 * p).sum();
    ensure!((second - 7.8848).abs() < 1e-12, "convolution gives E[Y_2^2] = {second}");
    let from_table = ok(table.moment_f64(2, 2))?;
    ensure!((from_table - second).abs() <= 1e-12, "table E[Y_2^2] = {from_table}");
    ensure!(table.coeff(1, 1) == Some(&BigRational::one()), "a_11 = {:?}", table.coeff(1, 1));
    for k in 1..=5 {
        let sum = table.row(k).unwrap().iter().fold(BigRational::zero(), |a, b| a + b);
        let err = (sum.to_f64().unwrap() - 1.0).abs();
        ensure!(err <= 1e-12, "row {k} sums to {sum}");
    }
    Ok(format!("max relative error {worst:.1e}; E[Y_2^2] = {from_table}"))
}

fn percolation_spectrum() -> Check {
    let params = ok(PercolationParams::from_f64(2, 2, 0.7))?;
    let b = ok(box_dimension(&params))?;
    let expected = 2.8f64.ln() / 2f64.ln();
    ensure!((b - expected).abs() < 1e-12, "box dimension {b}");
    let est = ok(empirical_spectrum_mc(&params, 0.5, 12, 200, 20_240_501))?;
    let err = (est.estimate - b).abs();
    ensure!(err <= 0.15, "estimate {} vs B = {b} (error {err})", est.estimate);
    ensure!(est.estimate < 2.0 - 0.3, "estimate {} not below d - 0.3", est.estimate);
    Ok(format!(
        "estimate {:.4} ± {:.4} vs B = {b:.4}; survival {:.3}",
        est.estimate, est.spread, est.survival_fraction
    ))
}

fn moran_recipe() -> Check {
    let seq = ok(recipe_sequence(0.5, 2.0, 10))?;
    let spec = MoranSpec::dyadic(&seq);
    let k_max = 10_000;
    let mut parts = Vec::new();
    for theta in [0.2, 0.5, 0.8] {
        let est = ok(assouad_spectrum_trunc(&spec, theta, k_max, TailWindow::Geometric(10.0)))?;
        let target = (0.25f64 / (1.0 - theta)).min(0.5);
        let err = (est.sup_tail - target).abs();
        ensure!(err <= 0.05, "θ = {theta}: {} vs {target}", est.sup_tail);
        parts.push(format!("θ={theta}: {:.4}/{target:.4}", est.sup_tail));
    }
    let inv = invert(&seq);
    for theta in [0.2, 0.5, 0.8] {
        let a = ok(window_counts(&seq, theta, k_max))?;
        let b = ok(window_counts(&inv, theta, k_max))?;
        for (x, y) in a.iter().zip(&b) {
            ensure!(
                x.l == y.l && x.twos + y.twos == (x.l - x.k) as u64,
                "duality fails at θ = {theta}, k = {}",
                x.k
            );
        }
    }
    Ok(format!("{}; duality exact for all k ≤ {k_max}", parts.join(", ")))
}

fn tail_density_suite() -> Check {
    let lambdas: Vec<f64> = (1..=20).map(|i| 1.0 + 0.25 * i as f64).collect();
    for q in [2u64, 3, 5] {
        let set = ok(IntegerSet::multiples(q))?;
        let d = 1.0 / q as f64;
        let e = exact_limits(&set).ok_or("no exact limits")?;
        let six = [
            e.upper_asymptotic,
            e.lower_asymptotic,
            e.upper_banach,
            e.lower_banach,
            e.upper_tail,
            e.lower_tail,
        ];
        ensure!(six.iter().all(|&v| v == d), "q = {q}: {six:?}");
        let asym = ok(asymptotic_densities(&set, 10_000, TailWindow::default()))?;
        let tail = ok(tail_densities(&set, 2.0, 10_000, TailWindow::default()))?;
        ensure!(asym.exact == Some(d) && tail.exact == Some(d), "q = {q}: exact mode missing");
        let report = ok(check_taildensity_props(&set, &lambdas, 10_000, 0, q))?;
        ensure!(report.passed(), "q = {q}: {:?}", report.violations);
        let windows = random_windows(1_000_000, 100_000, 7 + q);
        let bad = ok(complement_identity(&set, &windows))?;
        ensure!(bad == 0, "q = {q}: complement identity fails on {bad} windows");
    }
    Ok("q ∈ {2,3,5}: six densities = 1/q, bounds hold, 1e5 windows exact".into())
}

fn pressure_roots() -> Check {
    let cantor = ok(SimilarIfs::from_pairs(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)]))?;
    let s = ok(similarity_exponent(&cantor, DEFAULT_TOL))?;
    let target = 2f64.ln() / 3f64.ln();
    ensure!((s - target).abs() <= 1e-10, "cantor exponent {s}");
    let full = ok(SimilarIfs::from_pairs(&[(0.5, 0.0), (0.3, 0.5), (0.2, 0.8)]))?;
    let s1 = ok(similarity_exponent(&full, DEFAULT_TOL))?;
    ensure!((s1 - 1.0).abs() <= 1e-10, "ratios summing to 1 give {s1}");
    let uneven = ok(SimilarIfs::from_pairs(&[(0.5, 0.0), (0.3, 0.7)]))?;
    let su = ok(similarity_exponent(&uneven, DEFAULT_TOL))?;
    let mut worst = 0.0f64;
    for (ifs, s) in [(&cantor, s), (&uneven, su)] {
        for delta in [1e-1, 1e-2, 1e-3, 1e-4] {
            let set = ok(stopping_set(ifs, delta))?;
            let mut total = 0.0;
            for w in &set.words {
                total += ok(gibbs_mass(ifs, s, w))?;
            }
            worst = worst.max((total - 1.0).abs());
        }
    }
    ensure!(worst <= 1e-9, "stopping-set mass off by {worst}");
    Ok(format!("exponents exact to 1e-10; mass error {worst:.1e} down to δ = 1e-4"))
}

fn random_carpet(rng: &mut ChaCha8Rng) -> CarpetSpec {
    loop {
        let m = rng.random_range(2..=6u32);
        let n = rng.random_range(m + 1..=m + 5);
        let keep = rng.random_range(0.15..0.85);
        let rects: Vec<(u32, u32)> = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|_| rng.random_bool(keep))
            .collect();
        if let Ok(spec) = CarpetSpec::new(m, n, rects) {
            return spec;
        }
    }
}

/// A feasible periodic uniform spec and its (single) dimension value.
fn random_periodic_moran(rng: &mut ChaCha8Rng, len: usize) -> (MoranSpec, f64) {
    let q = rng.random_range(1..=4usize);
    let cs: Vec<f64> = (0..q).map(|_| rng.random_range(0.1..0.6)).collect();
    let ns: Vec<u32> = cs.iter().map(|c| rng.random_range(1..=(1.0 / c).floor() as u32)).collect();
    let s = ns.iter().map(|&n| (n as f64).ln()).sum::<f64>() / cs.iter().map(|c| -c.ln()).sum::<f64>();
    let c = ContractionSeq::Sequence((0..len).map(|i| cs[i % q]).collect());
    let n = Branching::Sequence((0..len).map(|i| ns[i % q]).collect());
    (MoranSpec::new(c, n).unwrap(), s)
}

fn envelope_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid = ok(ThetaGrid::uniform(199))?;
    for idx in 0..1000 {
        let spec = random_carpet(&mut rng);
        let dims = carpet_dimensions(&spec);
        let a = ok(assouad_curve(&spec, &grid))?;
        let l = ok(lower_curve(&spec, &grid))?;
        for curve in [&a, &l] {
            let report = ok(check_curve(curve, &dims, 1e-9, None))?;
            ensure!(report.is_empty(), "carpet {idx} ({spec:?}): {:?}", report.envelope.first());
        }
        ensure!(
            a.values.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            "carpet {idx}: assouad curve decreases"
        );
        let ratio = spec.ratio();
        for (t, v) in a.points() {
            ensure!(t < ratio || (v - dims.assouad).abs() <= 1e-9, "carpet {idx}: not constant at θ = {t}");
        }
    }
    let thetas = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let k_max = 3000;
    let mut worst = 0.0f64;
    for idx in 0..100 {
        let (spec, s) = random_periodic_moran(&mut rng, 140_000);
        let dims = ok(DimensionSummary::new(s, s, s, s, 1))?;
        for &theta in &thetas {
            let up = ok(assouad_spectrum_trunc(&spec, theta, k_max, TailWindow::default()))?;
            let down = ok(lower_spectrum_trunc(&spec, theta, k_max, TailWindow::default()))?;
            for (kind, v) in [(SpectrumKind::Assouad, up.sup_tail), (SpectrumKind::Lower, down.inf_tail)] {
                let (lo, hi) = ok(dims.envelope(kind, theta))?;
                let miss = (lo - v).max(v - hi).max(0.0);
                worst = worst.max(miss);
                ensure!(miss <= 0.05, "moran {idx} θ = {theta} {kind:?}: {v} outside [{lo}, {hi}]");
            }
        }
    }
    Ok(format!("1000 carpets within 1e-9; 100 Moran specs within {worst:.4} (tol 0.05)"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "carpet closed forms", Duration::from_secs(1), carpet_closed_forms),
        (2, "oracle equivalence", Duration::from_secs(120), oracle_equivalence),
        (3, "equal-dimension carpet pair", Duration::from_secs(1), equal_dimension_pair),
        (4, "GW moments", Duration::from_secs(5), gw_moments),
        (5, "percolation spectrum", Duration::from_secs(120), percolation_spectrum),
        (6, "Moran recipe", Duration::from_secs(10), moran_recipe),
        (7, "tail densities", Duration::from_secs(10), tail_density_suite),
        (8, "pressure roots", Duration::from_secs(5), pressure_roots),
        (9, "envelope suite", Duration::from_secs(60), envelope_suite),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("[{tag}] {id}. {name} ({:.2} s, limit {} s): {detail}", elapsed.as_secs_f64(), limit.as_secs());
        if outcome.is_err() {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
