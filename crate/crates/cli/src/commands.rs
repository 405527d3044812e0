use clap::{Args, Subcommand, ValueEnum};
use coprime_scope::affine::{affine_census, affine_limit_compare, snf_maximality_check, SubgroupBasis};
use coprime_scope::graphon::{
    clique_density, homomorphism_density, joint_local_graphon, render_graphon_figure, sample_graphon_graph, DensitySource,
    SimpleGraph,
};
use coprime_scope::harness::{census_patterns, compare_to_limit};
use coprime_scope::image::Image;
use coprime_scope::lattice::{coprime_free_box, prime_table, verify_free_box};
use coprime_scope::limit_law::{limit_cylinder_distribution, Law};
use coprime_scope::percolation::percolation_experiment;
use coprime_scope::rng::domain;
use coprime_scope::sampler::{sample_cop_window, sample_cop_window_truncated, sample_gcd_window, sample_gcd_window_truncated};
use coprime_scope::{GcdLabel, Seed, Window};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{parse, Failure, Output};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact window-pattern census over a scaled region.
    Census(CensusArgs),
    /// Certified limit-law masses of every window pattern.
    Limit(LimitArgs),
    /// Seeded samples of the limit colouring or labelling.
    Sample(SampleArgs),
    /// A box without coprime points, with its exhaustive check.
    Freebox(FreeboxArgs),
    /// Cluster statistics of sampled colourings.
    Percolate(PercolateArgs),
    /// Visibility graphon experiments.
    Graphon(GraphonArgs),
    /// Gcd censuses anchored on a subgroup.
    Affine(AffineArgs),
    /// The subdivided-square figure or a sampled colouring, as PPM.
    Render(RenderArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Census(_) => "census",
            Command::Limit(_) => "limit",
            Command::Sample(_) => "sample",
            Command::Freebox(_) => "freebox",
            Command::Percolate(_) => "percolate",
            Command::Graphon(_) => "graphon",
            Command::Affine(_) => "affine",
            Command::Render(_) => "render",
        }
    }
}

pub fn execute(cmd: &Command, seed: Seed) -> Result<Output, Failure> {
    match cmd {
        Command::Census(a) => census(a),
        Command::Limit(a) => limit(a),
        Command::Sample(a) => sample(a, seed),
        Command::Freebox(a) => freebox(a),
        Command::Percolate(a) => percolate(a, seed),
        Command::Graphon(a) => graphon(a, seed),
        Command::Affine(a) => affine(a, seed),
        Command::Render(a) => render(a, seed),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawArg {
    Cop,
    Gcd,
    Kfree,
}

#[derive(Args, Debug, Serialize)]
pub struct LawFlags {
    #[arg(long, value_enum, default_value_t = LawArg::Cop)]
    law: LawArg,
    /// Largest gcd label kept apart (gcd law).
    #[arg(long, default_value_t = 10)]
    cap: u64,
    /// Exponent of the k-free law.
    #[arg(long, default_value_t = 2)]
    k: u32,
}

impl LawFlags {
    fn law(&self) -> Law {
        match self.law {
            LawArg::Cop => Law::Cop,
            LawArg::Gcd => Law::Gcd { cap: self.cap },
            LawArg::Kfree => Law::KFree { k: self.k },
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct RegionFlags {
    /// Box `LO:HI`, corners scalar (a cube, with --d) or points (`1,1:50,80`).
    #[arg(long = "box")]
    boxed: Option<String>,
    /// Euclidean ball radius (rational).
    #[arg(long)]
    ball: Option<String>,
    /// Ball center (rational coordinates).
    #[arg(long)]
    center: Option<String>,
    /// Scale factor r of F_r = {x : x/r in F}.
    #[arg(long, default_value = "1")]
    scale: String,
}

impl RegionFlags {
    fn region(&self, d: Option<usize>) -> Result<coprime_scope::Region, Failure> {
        parse::region(self.boxed.as_deref(), self.ball.as_deref(), self.center.as_deref(), d)
    }
}

fn window_or_origin(w: Option<&str>, d: usize) -> Result<Window, Failure> {
    match w {
        Some(w) => parse::window(w, Some(d)),
        None => Ok(Window::origin(d)),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CensusArgs {
    #[arg(long)]
    d: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    region: RegionFlags,
    /// Offsets `0,0;1,0` or `box:LO:HI` (default: the origin).
    #[arg(long)]
    window: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    law: LawFlags,
    /// Also compute the limit marginal and the total variation to it.
    #[arg(long)]
    compare: bool,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
}

fn census(a: &CensusArgs) -> Result<Output, Failure> {
    let region = a.region.region(a.d)?;
    let d = region.dim();
    let window = window_or_origin(a.window.as_deref(), d)?;
    let law = a.law.law();
    let dist = census_patterns(&region, parse::ratio(&a.region.scale)?, &window, law)?;
    let mut result = to_value(&dist);
    if law != (Law::Gcd { cap: a.law.cap }) {
        let n = window.len();
        let white: Vec<f64> = (0..n)
            .map(|i| {
                let bit = 1u64 << (n - 1 - i);
                dist.counts.iter().filter(|(k, _)| *k & bit != 0).map(|(_, c)| *c).sum::<u64>() as f64 / dist.total as f64
            })
            .collect();
        result["white_fraction"] = json!(white);
    }
    let mut bounds = json!({ "census": "exact" });
    if a.compare {
        let limit = limit_cylinder_distribution(&window, law, d, a.eps)?;
        let report = compare_to_limit(&dist, &limit)?;
        bounds["limit_error"] = json!(report.limit_error);
        result["comparison"] = to_value(&report);
    }
    let space = dist.space();
    let rows =
        dist.counts.iter().map(|(&k, &c)| vec![space.format(k), c.to_string(), dist.fraction(k).to_string()]).collect();
    Ok(Output {
        params: to_value(a),
        result,
        error_bounds: bounds,
        table: Some((vec!["pattern".into(), "count".into(), "fraction".into()], rows)),
        image: None,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct LimitArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    window: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    law: LawFlags,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
}

fn limit(a: &LimitArgs) -> Result<Output, Failure> {
    let window = window_or_origin(a.window.as_deref(), a.d)?;
    let dist = limit_cylinder_distribution(&window, a.law.law(), a.d, a.eps)?;
    let rows = dist.rows();
    let patterns: Vec<Value> =
        rows.iter().map(|(p, v)| json!({ "pattern": p, "value": v.value, "error": v.error })).collect();
    let mut result = to_value(&dist);
    result["patterns"] = json!(patterns);
    Ok(Output {
        params: to_value(a),
        result,
        error_bounds: json!({ "total_error": dist.total_error() }),
        table: Some((
            vec!["pattern".into(), "value".into(), "error".into()],
            rows.iter().map(|(p, v)| vec![p.clone(), v.value.to_string(), v.error.to_string()]).collect(),
        )),
        image: None,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    window: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    law: LawFlags,
    /// Total variation budget of each sample.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Use every prime up to this bound instead of choosing from --eps.
    #[arg(long)]
    max_prime: Option<u64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
}

fn sample(a: &SampleArgs, seed: Seed) -> Result<Output, Failure> {
    let window = window_or_origin(a.window.as_deref(), a.d)?;
    if a.trials == 0 {
        return Err(Failure::Param("--trials must be at least 1".into()));
    }
    let mut samples = Vec::new();
    let mut rows = Vec::new();
    let (mut truncation, mut tv) = (0, 0.0);
    for t in 0..a.trials {
        let s = if a.trials == 1 { seed } else { seed.child(domain::TRIAL, t as u64) };
        let cells: Vec<Value> = match a.law.law {
            LawArg::Cop => {
                let smp = match a.max_prime {
                    Some(p) => sample_cop_window_truncated(&window, a.d, p, s)?,
                    None => sample_cop_window(&window, a.d, a.eps, s)?,
                };
                (truncation, tv) = (smp.truncation_prime, smp.tv_bound);
                smp.white.iter().map(|&w| json!(if w { "W" } else { "B" })).collect()
            }
            LawArg::Gcd => {
                let smp = match a.max_prime {
                    Some(p) => sample_gcd_window_truncated(&window, a.d, p, s)?,
                    None => sample_gcd_window(&window, a.d, a.eps, s)?,
                };
                (truncation, tv) = (smp.truncation_prime, smp.tv_bound);
                smp.labels
                    .iter()
                    .map(|l| match l {
                        GcdLabel::Finite(g) => json!(g),
                        GcdLabel::Infinite => json!("inf"),
                    })
                    .collect()
            }
            LawArg::Kfree => return Err(Failure::Param("sampling supports the cop and gcd laws".into())),
        };
        for (o, c) in window.offsets().iter().zip(&cells) {
            let v = c.as_str().map_or_else(|| c.to_string(), str::to_string);
            rows.push(vec![t.to_string(), o.to_string(), v]);
        }
        samples.push(json!({ "trial": t, "seed": s.0, "cells": cells }));
    }
    Ok(Output {
        params: to_value(a),
        result: json!({ "window": window, "truncation_prime": truncation, "samples": samples }),
        error_bounds: json!({ "tv_bound_per_sample": tv }),
        table: Some((vec!["trial".into(), "offset".into(), "value".into()], rows)),
        image: None,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct FreeboxArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 2)]
    d: usize,
}

fn freebox(a: &FreeboxArgs) -> Result<Output, Failure> {
    let fb = coprime_free_box(a.n, a.d)?;
    let check = verify_free_box(&fb);
    Ok(Output {
        params: to_value(a),
        result: json!({ "free_box": fb, "verification": check, "passed": check.passed() }),
        error_bounds: json!({ "exact": true }),
        table: None,
        image: None,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct PercolateArgs {
    /// Side length L of the box [0, L-1]^d.
    #[arg(long, default_value_t = 512)]
    side: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
}

fn percolate(a: &PercolateArgs, seed: Seed) -> Result<Output, Failure> {
    let rep = percolation_experiment(a.side, a.d, a.trials, a.eps, seed)?;
    let rows = rep
        .per_trial
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                i.to_string(),
                t.seed.to_string(),
                t.spanning_white.to_string(),
                t.white_components.to_string(),
                t.largest_white.to_string(),
                t.largest_black.to_string(),
                t.giant_white_components.to_string(),
            ]
        })
        .collect();
    let header = ["trial", "seed", "spanning_white", "white_components", "largest_white", "largest_black", "giant_white"];
    Ok(Output {
        params: to_value(a),
        error_bounds: json!({ "tv_bound_per_sample": rep.tv_bound }),
        result: to_value(&rep),
        table: Some((header.iter().map(|s| s.to_string()).collect(), rows)),
        image: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphonMode {
    /// Sample one graphon graph and report its edge density.
    Graph,
    /// Homomorphism density of a small pattern.
    Hom,
    /// Joint local/graphon law around two anchors.
    Joint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceArg {
    Graphon,
    Lattice,
}

#[derive(Args, Debug, Serialize)]
pub struct GraphonArgs {
    #[arg(long, value_enum, default_value_t = GraphonMode::Graph)]
    mode: GraphonMode,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Vertices of the sampled graph (graph mode).
    #[arg(long, default_value_t = 1416)]
    k: usize,
    /// Truncation error (default: 1e-6 per pair, 1e-4 per hom trial, 1e-3 for joint).
    #[arg(long)]
    eps: Option<f64>,
    /// edge, empty2, path3, triangle, star3, cycle4, k4, or `N:0-1,1-2`.
    #[arg(long, default_value = "edge")]
    pattern: String,
    #[arg(long, value_enum, default_value_t = SourceArg::Graphon)]
    source: SourceArg,
    /// Lattice region (hom and joint modes).
    #[arg(long = "box", default_value = "1:4000")]
    boxed: String,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 2)]
    anchors: usize,
    #[arg(long, default_value_t = 1)]
    radius: usize,
    #[arg(long, default_value_t = 10_000)]
    lattice_trials: usize,
    #[arg(long, default_value_t = 100_000)]
    graphon_trials: usize,
}

fn pattern(s: &str) -> Result<SimpleGraph, Failure> {
    let named: &[(&str, usize, &[(usize, usize)])] = &[
        ("edge", 2, &[(0, 1)]),
        ("empty2", 2, &[]),
        ("path3", 3, &[(0, 1), (1, 2)]),
        ("triangle", 3, &[(0, 1), (1, 2), (0, 2)]),
        ("star3", 4, &[(0, 1), (0, 2), (0, 3)]),
        ("cycle4", 4, &[(0, 1), (1, 2), (2, 3), (0, 3)]),
        ("k4", 4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
    ];
    if let Some((_, n, e)) = named.iter().find(|(name, _, _)| *name == s) {
        return Ok(SimpleGraph::from_edges(*n, e)?);
    }
    let bad = || Failure::Param(format!("unknown pattern `{s}`"));
    let (n, edges) = s.split_once(':').ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    let edges = edges
        .split(',')
        .filter(|e| !e.is_empty())
        .map(|e| {
            let (i, j) = e.split_once('-').ok_or_else(bad)?;
            Ok((i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?))
        })
        .collect::<Result<Vec<(usize, usize)>, Failure>>()?;
    Ok(SimpleGraph::from_edges(n, &edges)?)
}

fn graphon(a: &GraphonArgs, seed: Seed) -> Result<Output, Failure> {
    let region = || -> Result<coprime_scope::Region, Failure> {
        let (lo, hi) = parse::corners(&a.boxed, Some(a.d))?;
        Ok(coprime_scope::Region::boxed(lo, hi)?)
    };
    let one = num_rational::Ratio::from_integer(1);
    let (result, bounds) = match a.mode {
        GraphonMode::Graph => {
            let eps = a.eps.unwrap_or(1e-6);
            let g = sample_graphon_graph(a.k, a.d, eps, seed)?;
            let density = g.graph.edge_density();
            let target = clique_density(2, a.d, 1e-12)?;
            let r = json!({
                "vertices": a.k,
                "pairs": g.graph.pairs(),
                "edges": density.successes,
                "edge_density": density,
                "inverse_zeta": target,
                "z_score": (density.value - target.value) / density.std_err,
                "truncation_prime": g.truncation_prime,
            });
            (r, json!({ "tv_bound": g.tv_bound, "per_pair_eps": eps }))
        }
        GraphonMode::Hom => {
            let eps = a.eps.unwrap_or(1e-4);
            let f = pattern(&a.pattern)?;
            let source = match a.source {
                SourceArg::Graphon => DensitySource::Graphon { d: a.d },
                SourceArg::Lattice => DensitySource::Lattice { region: region()?, r: one },
            };
            let h = homomorphism_density(&f, &source, a.trials, eps, seed)?;
            let mut r = to_value(&h);
            if f.edge_count() == f.pairs() {
                r["complete_target"] = to_value(&clique_density(f.vertices(), a.d, 1e-12)?);
            }
            (r, json!({ "bias_bound": h.bias_bound }))
        }
        GraphonMode::Joint => {
            let eps = a.eps.unwrap_or(1e-3);
            let rep = joint_local_graphon(a.anchors, a.radius, &region()?, one, a.lattice_trials, a.graphon_trials, eps, seed)?;
            let b = json!({ "tv_bound": rep.tv_bound });
            (to_value(&rep), b)
        }
    };
    Ok(Output { params: to_value(a), result, error_bounds: bounds, table: None, image: None })
}

#[derive(Args, Debug, Serialize)]
pub struct AffineArgs {
    /// Basis columns `1,0;0,1` (columns separated by `;`).
    #[arg(long)]
    basis: String,
    /// Lower corner of the coefficient box (one entry per column).
    #[arg(long)]
    lo: String,
    #[arg(long)]
    hi: String,
    #[arg(long)]
    window: String,
    #[arg(long, default_value_t = 10)]
    cap: u64,
    /// Compare the census with samples of the limit law on the subgroup.
    #[arg(long)]
    compare: bool,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
}

fn affine(a: &AffineArgs, seed: Seed) -> Result<Output, Failure> {
    let basis: SubgroupBasis = a.basis.parse()?;
    let maximality = snf_maximality_check(&basis);
    let window = parse::window(&a.window, Some(basis.dim()))?;
    let (lo, hi) = (parse::point(&a.lo)?, parse::point(&a.hi)?);
    let census = affine_census(&basis, &lo, &hi, &window, a.cap)?;
    let mut result = json!({ "maximality": maximality, "census": census });
    let mut bounds = json!({ "census": "exact" });
    if a.compare {
        let cmp = affine_limit_compare(&basis, &lo, &hi, &window, a.cap, a.eps, a.trials, seed)?;
        bounds["sampling_ci"] = json!(cmp.sampling_ci);
        result["comparison"] = json!({ "tv": cmp.tv, "sampling_ci": cmp.sampling_ci, "sampled": cmp.sampled });
    }
    let space = census.full.space();
    let rows = census
        .full
        .counts
        .iter()
        .map(|(&k, &c)| vec![space.format(k), c.to_string(), census.full.fraction(k).to_string()])
        .collect();
    Ok(Output {
        params: to_value(a),
        result,
        error_bounds: bounds,
        table: Some((vec!["pattern".into(), "count".into(), "fraction".into()], rows)),
        image: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderWhat {
    /// The subdivided unit square of the graphon kernel.
    Figure,
    /// A sampled coprime colouring around --center.
    Coloring,
}

#[derive(Args, Debug, Serialize)]
pub struct RenderArgs {
    #[arg(long, value_enum, default_value_t = RenderWhat::Figure)]
    what: RenderWhat,
    /// Figure depth (levels of subdivision, at most 6).
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Image side in pixels.
    #[arg(long, default_value_t = 512)]
    size: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Colouring center.
    #[arg(long, default_value = "0,0")]
    center: String,
    /// Colouring total variation budget; clamped to the prime table when unreachable.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long)]
    max_prime: Option<u64>,
}

fn render(a: &RenderArgs, seed: Seed) -> Result<Output, Failure> {
    let (img, result, bounds) = match a.what {
        RenderWhat::Figure => {
            let img = render_graphon_figure(a.depth, a.size, a.d)?;
            let expected = 1.0
                - prime_table()[..a.depth].iter().map(|&p| 1.0 - (p as f64).powi(-(a.d as i32))).product::<f64>();
            let black = img.black_pixels();
            let r = json!({
                "width": img.width,
                "height": img.height,
                "black_pixels": black,
                "black_fraction": black as f64 / (img.width * img.height) as f64,
                "limit_black_fraction": expected,
            });
            (img, r, json!({ "exact": true }))
        }
        RenderWhat::Coloring => {
            let c = parse::point(&a.center)?;
            if c.len() != 2 {
                return Err(Failure::Param("colourings are rendered in d = 2".into()));
            }
            if a.size == 0 {
                return Err(Failure::Param("--size must be at least 1".into()));
            }
            let s = a.size as i64;
            let lo = [c[0] - s / 2, c[1] - s / 2];
            let hi = [lo[0] + s - 1, lo[1] + s - 1];
            let window = Window::box_window(&lo, &hi)?;
            let mut clamped = false;
            let sample = match a.max_prime {
                Some(p) => sample_cop_window_truncated(&window, 2, p, seed)?,
                None => match sample_cop_window(&window, 2, a.eps, seed) {
                    Err(e) if e.is_budget() => {
                        clamped = true;
                        sample_cop_window_truncated(&window, 2, *prime_table().last().expect("primes"), seed)?
                    }
                    other => other?,
                },
            };
            // x to the right, y upwards
            let n = a.size;
            let mut white = vec![false; n * n];
            for row in 0..n {
                for col in 0..n {
                    white[row * n + col] = sample.white[col * n + (n - 1 - row)];
                }
            }
            let img = Image::from_mask(n, n, &white)?;
            let r = json!({
                "width": n,
                "height": n,
                "lower_left": lo,
                "white_pixels": sample.white_count(),
                "truncation_prime": sample.truncation_prime,
                "clamped": clamped,
            });
            (img, r, json!({ "tv_bound": sample.tv_bound }))
        }
    };
    Ok(Output { params: to_value(a), result, error_bounds: bounds, table: None, image: Some(img.to_ppm()) })
}
