//! End-to-end acceptance checks, one line per check.
//!
//! Runs without the libtest harness so the lines always reach stdout. Pass
//! check numbers as arguments to run a subset: `cargo test --test acceptance -- 4 12`.

use std::collections::HashMap;
use std::process::Command;
use std::time::Instant;

use coprime_scope::affine::{affine_census, affine_limit_compare, SubgroupBasis};
use coprime_scope::graphon::{clique_density, homomorphism_density, joint_local_graphon, lattice_visibility_graph, sample_graphon_graph, DensitySource, SimpleGraph};
use coprime_scope::harness::{census_patterns, compare_to_limit, domination_check, gcd_histogram_test, residue_census};
use coprime_scope::lattice::{coprime_free_box, verify_free_box, zeta};
use coprime_scope::limit_law::{
    gcd_prime_count, limit_cylinder_distribution, prob_all_white, prob_cop_cylinder, prob_gcd_cylinder, prob_kfree_cylinder,
    CopCylinder, GcdCylinder, Law,
};
use coprime_scope::percolation::percolation_experiment;
use coprime_scope::rng::domain;
use coprime_scope::sampler::{sample_cop_window, sample_gcd_window};
use coprime_scope::{GcdLabel, LatticePoint, Region, Seed, Window};
use num_rational::Ratio;

const INV_ZETA2: f64 = 0.607_927_101_854_026_6; // 6/π²
const DENSITY_TOL: f64 = 0.001;
const SINGLE_THREAD_SECONDS: f64 = 30.0;
const ZETA_HISTOGRAM_TV: f64 = 0.005;
const SELF_CONSISTENCY_TOL: f64 = 1e-9;
const LOCAL_LIMIT_TV: f64 = 0.01;
const DOMINATION_TOL: f64 = 0.01;
const EQUIDISTRIBUTION_REL: f64 = 0.01;
const SIGMAS: f64 = 3.0;
const GRAPHON_EDGE_SLACK: f64 = 1e-6;
const JOINT_TV: f64 = 0.02;
const AFFINE_TV: f64 = 0.02;
const BLACK_CLUSTER_FRACTION: f64 = 0.01;

type Check = fn() -> Result<(bool, String), String>;

fn one() -> Ratio<i64> {
    Ratio::from_integer(1)
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn pt(c: &[i64]) -> LatticePoint {
    LatticePoint(c.to_vec())
}

fn square(lo: i64, hi: i64) -> Region {
    Region::cube(2, lo, hi).unwrap()
}

fn coprime_density() -> Result<(bool, String), String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(e)?;
    let start = Instant::now();
    let c = pool.install(|| census_patterns(&square(1, 4000), one(), &Window::origin(2), Law::Cop)).map_err(e)?;
    let secs = start.elapsed().as_secs_f64();
    let white = c.fraction(1);
    let ok = (white - INV_ZETA2).abs() <= DENSITY_TOL && secs <= SINGLE_THREAD_SECONDS;
    Ok((ok, format!("white {white:.6} vs 1/zeta(2) {INV_ZETA2:.6} (tol {DENSITY_TOL}), {secs:.2} s on one thread")))
}

fn zeta_gcd_law() -> Result<(bool, String), String> {
    let r = gcd_histogram_test(&square(1, 4000), one(), 50).map_err(e)?;
    Ok((r.tv <= ZETA_HISTOGRAM_TV + r.tv_error, format!("tv {:.5} (tol {ZETA_HISTOGRAM_TV})", r.tv)))
}

fn limit_self_consistency() -> Result<(bool, String), String> {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [2usize, 3, 4] {
        let v = prob_all_white(&[LatticePoint::zero(d)], d, 1e-12).map_err(e)?;
        let z = zeta(d as u32, 1e-13).map_err(e)?.recip();
        let gap = (v.value - z.value).abs();
        ok &= gap <= SELF_CONSISTENCY_TOL + v.error + z.error;
        parts.push(format!("d={d}: gap {gap:.1e} (cert {:.1e})", v.error + z.error));
    }
    Ok((ok, parts.join(", ")))
}

fn cop_local_limit() -> Result<(bool, String), String> {
    let w = Window::box_window(&[0, 0], &[1, 1]).map_err(e)?;
    let limit = limit_cylinder_distribution(&w, Law::Cop, 2, 1e-9).map_err(e)?;
    let boxed = compare_to_limit(&census_patterns(&square(1, 2000), one(), &w, Law::Cop).map_err(e)?, &limit).map_err(e)?;
    let ball = Region::int_ball(&[0, 0], 1000).map_err(e)?;
    let ball = compare_to_limit(&census_patterns(&ball, one(), &w, Law::Cop).map_err(e)?, &limit).map_err(e)?;
    let ok = boxed.tv <= LOCAL_LIMIT_TV + boxed.limit_error && ball.tv <= LOCAL_LIMIT_TV + ball.limit_error;
    Ok((ok, format!("box tv {:.5}, ball tv {:.5} (tol {LOCAL_LIMIT_TV})", boxed.tv, ball.tv)))
}

fn gcd_local_limit() -> Result<(bool, String), String> {
    let w = Window::new(vec![pt(&[0, 0]), pt(&[1, 0])]).map_err(e)?;
    let law = Law::Gcd { cap: 10 };
    let limit = limit_cylinder_distribution(&w, law, 2, 1e-9).map_err(e)?;
    let r = compare_to_limit(&census_patterns(&square(1, 2000), one(), &w, law).map_err(e)?, &limit).map_err(e)?;
    Ok((r.tv <= LOCAL_LIMIT_TV + r.limit_error, format!("tv {:.5} over {} patterns (tol {LOCAL_LIMIT_TV})", r.tv, r.patterns)))
}

/// `min_i v_p(y_i)`, capped at 3.
fn capped_valuation(y: &[i64], p: i64) -> u32 {
    y.iter()
        .map(|&c| {
            let mut c = c;
            let mut v = 0;
            while v < 3 && c % p == 0 {
                c /= p;
                v += 1;
            }
            v
        })
        .min()
        .unwrap()
}

fn crt_oracle() -> Result<(bool, String), String> {
    const M: i64 = 216; // 2³·3³
    let pool = [pt(&[0, 0]), pt(&[1, 0]), pt(&[0, 1]), pt(&[1, 1]), pt(&[2, 0])];
    let exps: Vec<(u32, u32)> = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).collect();
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for mask in 1u32..(1 << pool.len()) {
        if mask.count_ones() <= 3 {
            subsets.push((0..pool.len()).filter(|i| mask >> i & 1 == 1).collect());
        }
    }
    let (mut checked, mut mismatches, mut nonzero) = (0u64, 0u64, 0u64);
    for s in &subsets {
        // direct count of the (v_2, v_3) profile of every y ∈ (Z/216)^2
        let mut direct: HashMap<Vec<(u32, u32)>, i128> = HashMap::new();
        for y0 in 0..M {
            for y1 in 0..M {
                let prof: Vec<(u32, u32)> = s
                    .iter()
                    .map(|&i| {
                        let v = [(y0 + pool[i].0[0]).rem_euclid(M), (y1 + pool[i].0[1]).rem_euclid(M)];
                        (capped_valuation(&v, 2), capped_valuation(&v, 3))
                    })
                    .collect();
                *direct.entry(prof).or_insert(0) += 1;
            }
        }
        let offsets: Vec<&[i64]> = s.iter().map(|&i| pool[i].0.as_slice()).collect();
        let mut labels = vec![0usize; s.len()];
        loop {
            let ab: Vec<(u32, u32)> = labels.iter().map(|&l| exps[l]).collect();
            let t2: Vec<u32> = ab.iter().map(|x| x.0).collect();
            let t3: Vec<u32> = ab.iter().map(|x| x.1).collect();
            let (c2, e2) = gcd_prime_count(&offsets, &t2, 2, 2).map_err(e)?;
            let (c3, e3) = gcd_prime_count(&offsets, &t3, 3, 2).map_err(e)?;
            let formula = Ratio::new(c2 as i128, 2i128.pow(2 * (e2 + 1))) * Ratio::new(c3 as i128, 3i128.pow(2 * (e3 + 1)));
            let count = direct.get(&ab).copied().unwrap_or(0);
            let oracle = Ratio::new(count, (M * M) as i128);
            checked += 1;
            nonzero += (count > 0) as u64;
            mismatches += (formula != oracle) as u64;
            // next labelling
            let mut i = 0;
            while i < labels.len() && labels[i] == exps.len() - 1 {
                labels[i] = 0;
                i += 1;
            }
            if i == labels.len() {
                break;
            }
            labels[i] += 1;
        }
    }
    Ok((mismatches == 0, format!("{checked} cylinders ({nonzero} of positive mass), {mismatches} mismatches")))
}

fn sampler_agreement() -> Result<(bool, String), String> {
    const TRIALS: u64 = 100_000;
    const EPS: f64 = 1e-4;
    let cops: Vec<(Vec<LatticePoint>, Vec<LatticePoint>)> = vec![
        (vec![pt(&[0, 0])], vec![]),
        (vec![pt(&[0, 0]), pt(&[1, 0])], vec![]),
        (vec![pt(&[0, 0])], vec![pt(&[1, 1])]),
        (vec![], vec![pt(&[0, 0]), pt(&[2, 0])]),
        (vec![pt(&[0, 0]), pt(&[1, 0]), pt(&[0, 1])], vec![pt(&[1, 1])]),
    ];
    let gcds: Vec<Vec<(LatticePoint, u64)>> = vec![
        vec![(pt(&[0, 0]), 1)],
        vec![(pt(&[0, 0]), 2)],
        vec![(pt(&[0, 0]), 2), (pt(&[1, 0]), 1), (pt(&[0, 2]), 2)],
    ];
    let seed = Seed(2024);
    let mut ok = true;
    let mut worst = 0.0f64;
    for (white, black) in &cops {
        let cyl = CopCylinder::new(white.clone(), black.clone()).map_err(e)?;
        let exact = prob_cop_cylinder(&cyl, 2, 1e-9).map_err(e)?;
        let w = Window::new(white.iter().chain(black).cloned().collect()).map_err(e)?;
        let mut hits = 0u64;
        let mut tv = 0.0;
        for t in 0..TRIALS {
            let smp = sample_cop_window(&w, 2, EPS, seed.child(domain::TRIAL, t)).map_err(e)?;
            tv = smp.tv_bound;
            hits += (white.iter().all(|x| smp.is_white(x) == Some(true))
                && black.iter().all(|x| smp.is_white(x) == Some(false))) as u64;
        }
        let f = hits as f64 / TRIALS as f64;
        let sigma = (exact.value * (1.0 - exact.value) / TRIALS as f64).sqrt();
        let allowed = SIGMAS * sigma + tv + exact.error;
        worst = worst.max((f - exact.value).abs() / allowed);
        ok &= (f - exact.value).abs() <= allowed;
    }
    for assignment in &gcds {
        let cyl = GcdCylinder::new(assignment.clone()).map_err(e)?;
        let exact = prob_gcd_cylinder(&cyl, 2, 1e-9).map_err(e)?;
        let w = Window::new(assignment.iter().map(|(x, _)| x.clone()).collect()).map_err(e)?;
        let mut hits = 0u64;
        let mut tv = 0.0;
        for t in 0..TRIALS {
            let smp = sample_gcd_window(&w, 2, EPS, seed.child(domain::TRIAL, t)).map_err(e)?;
            tv = smp.tv_bound;
            hits += assignment.iter().all(|(x, g)| smp.label(x) == Some(GcdLabel::Finite(*g))) as u64;
        }
        let f = hits as f64 / TRIALS as f64;
        let sigma = (exact.value * (1.0 - exact.value) / TRIALS as f64).sqrt();
        let allowed = SIGMAS * sigma + tv + exact.error;
        worst = worst.max((f - exact.value).abs() / allowed);
        ok &= (f - exact.value).abs() <= allowed;
    }
    Ok((ok, format!("8 cylinders, {TRIALS} seeds each, worst |freq - value| / (3 sigma + tv) = {worst:.3}")))
}

fn domination() -> Result<(bool, String), String> {
    let w = Window::box_window(&[0, 0], &[1, 1]).map_err(e)?;
    let r = domination_check(&w, &square(1, 2000), one(), DOMINATION_TOL, 1e-9).map_err(e)?;
    let ok = r.events.len() == 168 && r.violations == 0;
    Ok((ok, format!("{} events, {} violations, max excess {:.5}", r.events.len(), r.violations, r.max_excess)))
}

fn equidistribution() -> Result<(bool, String), String> {
    let r = residue_census(&Region::int_ball(&[0, 0], 500).map_err(e)?, one(), 6).map_err(e)?;
    let dev = r.max_relative_deviation();
    Ok((dev <= EQUIDISTRIBUTION_REL, format!("max relative deviation {dev:.5} over 36 classes (tol {EQUIDISTRIBUTION_REL})")))
}

fn free_boxes() -> Result<(bool, String), String> {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=3 {
        let fb = coprime_free_box(n, 2).map_err(e)?;
        let c = verify_free_box(&fb);
        ok &= c.passed();
        parts.push(format!("N={n}: {} points, {} coprime", c.points_checked, c.coprime_points));
    }
    Ok((ok, parts.join("; ")))
}

fn percolation() -> Result<(bool, String), String> {
    let r = percolation_experiment(2000, 2, 20, 1e-6, Seed(11)).map_err(e)?;
    let spanning = r.per_trial.iter().filter(|t| t.spanning_white).count();
    let ok = spanning >= 19 && r.max_largest_black_fraction <= BLACK_CLUSTER_FRACTION;
    Ok((ok, format!("{spanning}/20 spanning white, largest black cluster {:.2e} of the box", r.max_largest_black_fraction)))
}

fn graphon() -> Result<(bool, String), String> {
    let edge_target = clique_density(2, 2, 1e-12).map_err(e)?;
    let tri_target = clique_density(3, 2, 1e-12).map_err(e)?;
    let g = sample_graphon_graph(1416, 2, 1e-6, Seed(5)).map_err(e)?;
    let ge = g.graph.edge_density();
    let edge_ok = ge.trials >= 1_000_000 && ge.agrees_with(edge_target.value, SIGMAS, GRAPHON_EDGE_SLACK + edge_target.error);

    let tri = homomorphism_density(&SimpleGraph::triangle(), &DensitySource::Graphon { d: 2 }, 100_000, 1e-4, Seed(6)).map_err(e)?;
    let tri_ok = tri.hom.agrees_with(tri_target.value, SIGMAS, tri.bias_bound + tri_target.error);
    let independent = edge_target.value.powi(3);
    let correlated = !tri.hom.agrees_with(independent, SIGMAS, tri.bias_bound);

    let lattice = Region::cube(2, 1, 4000).map_err(e)?;
    let lg = lattice_visibility_graph(&lattice, one(), 1416, Seed(7)).map_err(e)?.edge_density();
    let lt = homomorphism_density(&SimpleGraph::triangle(), &DensitySource::Lattice { region: lattice, r: one() }, 100_000, 1e-4, Seed(8))
        .map_err(e)?;
    let lattice_ok = lg.agrees_with(edge_target.value, SIGMAS, 0.0) && lt.hom.agrees_with(tri_target.value, SIGMAS, tri_target.error);
    Ok((
        edge_ok && tri_ok && correlated && lattice_ok,
        format!(
            "graphon edges {:.5} over {} pairs, triangles {:.5} vs {:.5} (independent edges {:.5}); lattice edges {:.5}, triangles {:.5}",
            ge.value, ge.trials, tri.hom.value, tri_target.value, independent, lg.value, lt.hom.value
        ),
    ))
}

fn joint_law() -> Result<(bool, String), String> {
    let r = joint_local_graphon(2, 1, &square(1, 2000), one(), 10_000, 100_000, 1e-3, Seed(9)).map_err(e)?;
    let ok = r.max_single_tv <= JOINT_TV && r.same_anchor_deterministic && r.coordinates.len() == 153;
    Ok((ok, format!(
        "{} coordinates, max single tv {:.5}, max pair tv {:.5}, same-anchor deterministic: {}",
        r.coordinates.len(), r.max_single_tv, r.max_pair_tv, r.same_anchor_deterministic
    )))
}

fn affine() -> Result<(bool, String), String> {
    let gamma: SubgroupBasis = "1,0".parse().map_err(e)?;
    let w = Window::single(pt(&[0, 2]));
    let c = affine_census(&gamma, &[1], &[1_000_000], &w, 10).map_err(e)?.full;
    let exact = c.total == 1_000_000 && c.count(1) == 500_000 && c.count(2) == 500_000 && c.counts.len() == 2;
    let cmp = affine_limit_compare(&gamma, &[1], &[1_000_000], &w, 10, 1e-6, 20_000, Seed(10)).map_err(e)?;

    let w2 = Window::new(vec![pt(&[0, 0]), pt(&[1, 0])]).map_err(e)?;
    let full = affine_census(&SubgroupBasis::full(2), &[1, 1], &[2000, 2000], &w2, 10).map_err(e)?.full;
    let main = census_patterns(&square(1, 2000), one(), &w2, Law::Gcd { cap: 10 }).map_err(e)?;
    let identical = full == main;
    Ok((
        exact && cmp.tv <= AFFINE_TV && identical,
        format!(
            "census {{1: {}, 2: {}}} of {}, sampler tv {:.5} (tol {AFFINE_TV}), Z^2 reduction identical: {identical}",
            c.count(1), c.count(2), c.total, cmp.tv
        ),
    ))
}

fn kfree() -> Result<(bool, String), String> {
    let v = prob_kfree_cylinder(&[LatticePoint::zero(2)], &[], 2, 2, 1e-12).map_err(e)?;
    let z = zeta(4, 1e-13).map_err(e)?.recip();
    let gap = (v.value - z.value).abs();
    let c = census_patterns(&square(1, 4000), one(), &Window::origin(2), Law::KFree { k: 2 }).map_err(e)?;
    let f = c.fraction(1);
    let ok = gap <= SELF_CONSISTENCY_TOL + v.error + z.error && (f - v.value).abs() <= DENSITY_TOL;
    Ok((ok, format!("limit {:.9} vs 1/zeta(4) {:.9}, census {f:.6}", v.value, z.value)))
}

fn run_cli(args: &[&str], threads: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_coprime-scope"))
        .args(args)
        .args(["--threads", threads, "--omit-runtime"])
        .output()
        .map_err(e)?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Result<(bool, String), String> {
    let dir = std::env::temp_dir().join(format!("coprime-scope-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(e)?;
    let runs: Vec<Vec<&str>> = vec![
        vec!["census", "--d", "2", "--box", "1:300", "--window", "box:0:1", "--law", "cop", "--compare"],
        vec!["limit", "--d", "2", "--window", "0,0;1,0", "--law", "gcd", "--cap", "5"],
        vec!["sample", "--d", "2", "--window", "box:0:3", "--law", "gcd", "--eps", "1e-3", "--trials", "5", "--seed", "3"],
        vec!["sample", "--d", "2", "--window", "box:0:3", "--law", "cop", "--eps", "1e-3", "--trials", "5", "--seed", "3"],
        vec!["freebox", "--n", "2", "--d", "2"],
        vec!["percolate", "--side", "64", "--trials", "4", "--eps", "1e-3", "--seed", "4"],
        vec!["graphon", "--mode", "graph", "--k", "200", "--seed", "5"],
        vec!["graphon", "--mode", "hom", "--pattern", "triangle", "--trials", "5000", "--seed", "5"],
        vec!["graphon", "--mode", "hom", "--pattern", "path3", "--source", "lattice", "--box", "1:500", "--trials", "5000"],
        vec!["graphon", "--mode", "joint", "--box", "1:300", "--lattice-trials", "10000", "--graphon-trials", "10000", "--eps", "1e-2"],
        vec!["affine", "--basis", "1,0", "--lo", "1", "--hi", "5000", "--window", "0,2;1,3", "--compare", "--trials", "2000"],
    ];
    let mut identical = 0;
    let mut diffs = Vec::new();
    for args in &runs {
        let a = run_cli(args, "1")?;
        let b = run_cli(args, "8")?;
        if a == b && !a.is_empty() {
            identical += 1;
        } else {
            diffs.push(args[0].to_string());
        }
    }
    let images: Vec<Vec<&str>> = vec![
        vec!["render", "--what", "figure", "--depth", "3", "--size", "300"],
        vec!["render", "--what", "coloring", "--center", "0,0", "--size", "512", "--eps", "1e-6", "--seed", "7"],
    ];
    for (i, args) in images.iter().enumerate() {
        let mut bytes = Vec::new();
        for threads in ["1", "8"] {
            let path = dir.join(format!("img{i}-{threads}.ppm"));
            let mut full = args.clone();
            let p = path.to_string_lossy().to_string();
            full.extend(["--out", p.as_str()]);
            let json = run_cli(&full, threads)?;
            bytes.push((json, std::fs::read(&path).map_err(e)?));
        }
        if bytes[0] == bytes[1] && bytes[0].1.starts_with(b"P6\n") {
            identical += 1;
        } else {
            diffs.push(format!("render {}", args[2]));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    let total = runs.len() + images.len();
    Ok((identical == total, format!("{identical}/{total} commands byte-identical across 1 and 8 threads {diffs:?}")))
}

fn main() {
    let checks: Vec<(u32, &str, Check)> = vec![
        (1, "coprime density", coprime_density),
        (2, "zeta gcd law", zeta_gcd_law),
        (3, "limit-law self-consistency", limit_self_consistency),
        (4, "colouring local limit", cop_local_limit),
        (5, "gcd local limit", gcd_local_limit),
        (6, "CRT oracle equivalence", crt_oracle),
        (7, "sampler/limit agreement", sampler_agreement),
        (8, "domination", domination),
        (9, "equidistribution mod 6", equidistribution),
        (10, "coprime-free boxes", free_boxes),
        (11, "percolation", percolation),
        (12, "graphon densities", graphon),
        (13, "joint local/graphon law", joint_law),
        (14, "affine subgroup census", affine),
        (15, "k-free density", kfree),
        (16, "determinism", determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in checks {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|err| (false, format!("error: {err}")));
        let secs = start.elapsed().as_secs_f64();
        println!("[{}] {id:02} {name}: {detail} ({secs:.1} s)", if pass { "PASS" } else { "FAIL" });
        failed += !pass as u32;
    }
    println!("acceptance: {}/{ran} passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
