use std::path::{Path, PathBuf};

use serde::Serialize;

use epsapprox::discrepancy::{beck_fiala, canonical_structure};
use epsapprox::io::{read_json, read_points_file, read_terrain_file, write_json, write_points_file};
use epsapprox::lowdisc::{irrational_lattice, stretched_vdc, van_der_corput, LatticeSpec};
use epsapprox::merge_reduce::{random_sample_baseline, weighted_epsilon_approx, ApproxCertificate, ReduceConfig};
use epsapprox::oracle::{eps_error_discrete, eps_error_terrain};
use epsapprox::scan::{max_rect_general, max_rect_linear, max_rect_poisson_approx, LinearStat, ScanResult, Statistic};
use epsapprox::sentinel::{build_sentinels, disjoint_sentinels, verify_sentinel, SentinelCheck};
use epsapprox::terrain::{gaussian_approx, pl_terrain_approx, GaussianSpec};
use epsapprox::{DirectionSet, Error, LinearPatch, RangeFamily, Result};

use crate::args::{
    ApproxArgs, ColorArgs, Command, EvalArgs, FamilyArg, GaussianCmd, Gen, Method, ScanArgs, SentinelArgs, StatKind,
    TerrainCmd,
};
use crate::manifest::{sibling, Recorder};

/// Runs one command; returns the path its manifest belongs next to.
pub fn run(cmd: &Command, seed: u64, rec: &mut Recorder) -> Result<PathBuf> {
    match cmd {
        Command::Gen(g) => gen(g, rec),
        Command::Color(a) => color(a, rec),
        Command::Approx(a) => approx(a, seed, rec),
        Command::Eval(a) => eval(a, rec),
        Command::Scan(a) => scan(a, rec),
        Command::Terrain(TerrainCmd::Approx { tin, eps, block_size, out, cert }) => {
            terrain(tin, *eps, *block_size, out, cert.as_deref(), rec)
        }
        Command::Gaussian(GaussianCmd::Approx { sigma, mean, eps, out, cert }) => {
            gaussian(sigma.0, mean.0, *eps, out, cert.as_deref(), rec)
        }
        Command::Sentinel(a) => sentinel(a, rec),
    }
}

fn family(f: &FamilyArg, dim: usize, rec: &mut Recorder) -> Result<RangeFamily> {
    match f {
        FamilyArg::Rect => Ok(RangeFamily::rect(dim)),
        FamilyArg::Kdir(path) => {
            let dirs: Vec<Vec<f64>> = read_json(rec.input(path))?;
            Ok(RangeFamily::k_oriented(DirectionSet::normalized(dim, dirs)?))
        }
    }
}

fn config(eps: f64, family: RangeFamily, block_size: Option<usize>) -> Result<ReduceConfig> {
    let cfg = ReduceConfig::new(eps, family)?;
    match block_size {
        Some(b) => cfg.with_block_size(b),
        None => Ok(cfg),
    }
}

fn gen(g: &Gen, rec: &mut Recorder) -> Result<PathBuf> {
    let (set, out) = match g {
        Gen::Vdc { n, out } => (van_der_corput(*n)?, out),
        Gen::Lattice { m, dim, out } => (irrational_lattice(&LatticeSpec::standard(*m, *dim)?, *dim)?, out),
        Gen::Stretched { n, patch, out } => {
            let p: LinearPatch = read_json(rec.input(patch))?;
            let p = LinearPatch::new(*p.rect(), *p.height())?;
            (stretched_vdc(*n, &p)?, out)
        }
    };
    write_points_file(rec.output(out), &set)?;
    Ok(out.clone())
}

fn color(a: &ColorArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let x = read_points_file(rec.input(&a.input), a.dim)?;
    let fam = family(&a.family, a.dim, rec)?;
    let chi = beck_fiala(&canonical_structure(&x, &fam.directions())?);
    write_json(rec.output(&a.out), &chi)?;
    Ok(a.out.clone())
}

fn approx(a: &ApproxArgs, seed: u64, rec: &mut Recorder) -> Result<PathBuf> {
    let x = read_points_file(rec.input(&a.input), a.dim)?;
    let fam = family(&a.family, a.dim, rec)?;
    let cert_path = a.cert.clone().unwrap_or_else(|| sibling(&a.out, "cert.json"));
    match a.method {
        Method::MergeReduce => {
            let cfg = config(a.eps, fam, a.block_size)?;
            let (p, cert) = weighted_epsilon_approx(&x, &cfg)?;
            write_points_file(rec.output(&a.out), &p)?;
            write_json(rec.output(&cert_path), &cert)?;
        }
        Method::Random => {
            let p = random_sample_baseline(&x, a.eps, a.delta, seed)?;
            write_points_file(rec.output(&a.out), &p)?;
        }
    }
    Ok(a.out.clone())
}

fn eval(a: &EvalArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let p = read_points_file(rec.input(&a.approx), a.dim)?;
    let report = match (&a.ground, &a.tin) {
        (Some(ground), _) => {
            let d = read_points_file(rec.input(ground), a.dim)?;
            eps_error_discrete(&p, &d, &family(&a.family, a.dim, rec)?)?
        }
        (None, Some(tin)) => {
            let t = read_terrain_file(rec.input(tin))?;
            if t.negative.is_some() {
                return Err(Error::Unsupported("evaluate the positive and negative parts separately".into()));
            }
            eps_error_terrain(&p, &t.positive, a.resolution)?
        }
        (None, None) => unreachable!("clap requires --ground or --tin"),
    };
    println!("{}", serde_json::to_string(&report)?);
    let target = a.report.clone().unwrap_or_else(|| sibling(&a.approx, "eval.json"));
    write_json(rec.output(&target), &report)?;
    Ok(target)
}

#[derive(Serialize)]
struct ScanOutput {
    result: ScanResult,
    exact: Option<ScanResult>,
}

fn scan(a: &ScanArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let m = read_points_file(rec.input(&a.measured), 2)?;
    let b = read_points_file(rec.input(&a.baseline), 2)?;
    let (result, stat) = match a.stat {
        StatKind::Poisson => (max_rect_poisson_approx(&m, &b, a.eps)?, Statistic::poisson_for(&m, &b)),
        StatKind::Linear => {
            let l = LinearStat::new(a.coeffs.0[0], a.coeffs.0[1], a.coeffs.0[2]);
            (max_rect_linear(&m, &b, &l)?, Statistic::Linear(l))
        }
    };
    let exact = if a.exact { Some(max_rect_general(&m, &b, &stat)?) } else { None };
    let out = ScanOutput { result, exact };
    println!("{}", serde_json::to_string(&out)?);
    let target = a.out.clone().unwrap_or_else(|| sibling(&a.measured, "scan.json"));
    write_json(rec.output(&target), &out)?;
    Ok(target)
}

#[derive(Serialize)]
struct TerrainCert {
    positive: ApproxCertificate,
    negative: Option<ApproxCertificate>,
}

fn terrain(
    tin: &Path,
    eps: f64,
    block_size: Option<usize>,
    out: &Path,
    cert: Option<&Path>,
    rec: &mut Recorder,
) -> Result<PathBuf> {
    let t = read_terrain_file(rec.input(tin))?;
    let cfg = config(eps, RangeFamily::rect(2), block_size)?;
    let (p, pos_cert) = pl_terrain_approx(&t.positive, &cfg)?;
    write_points_file(rec.output(out), &p)?;
    let negative = match &t.negative {
        Some(neg) => {
            let (q, c) = pl_terrain_approx(neg, &cfg)?;
            write_points_file(rec.output(&out.with_extension("neg.csv")), &q)?;
            Some(c)
        }
        None => None,
    };
    let cert_path = cert.map(Path::to_path_buf).unwrap_or_else(|| sibling(out, "cert.json"));
    write_json(rec.output(&cert_path), &TerrainCert { positive: pos_cert, negative })?;
    Ok(out.to_path_buf())
}

fn gaussian(
    sigma: [f64; 2],
    mean: [f64; 2],
    eps: f64,
    out: &Path,
    cert: Option<&Path>,
    rec: &mut Recorder,
) -> Result<PathBuf> {
    let g = GaussianSpec::new(mean, sigma)?;
    let (p, c) = gaussian_approx(&g, eps)?;
    write_points_file(rec.output(out), &p)?;
    let cert_path = cert.map(Path::to_path_buf).unwrap_or_else(|| sibling(out, "cert.json"));
    write_json(rec.output(&cert_path), &c)?;
    Ok(out.to_path_buf())
}

#[derive(Serialize)]
struct SentinelEntry {
    file: String,
    size: usize,
    check: SentinelCheck,
}

#[derive(Serialize)]
struct SentinelReport {
    eps: f64,
    ground_size: usize,
    sets: Vec<SentinelEntry>,
}

fn sentinel(a: &SentinelArgs, rec: &mut Recorder) -> Result<PathBuf> {
    let d = read_points_file(rec.input(&a.input), 2)?;
    let fam = RangeFamily::rect(2);
    let sets = if a.disjoint {
        disjoint_sentinels(&d, a.eps)?.sets
    } else {
        vec![build_sentinels(&d, &config(a.eps, fam.clone(), a.block_size)?)?]
    };
    std::fs::create_dir_all(&a.out_dir)?;
    let mut entries = Vec::with_capacity(sets.len());
    for (i, s) in sets.iter().enumerate() {
        let name = format!("sentinel_{i}.csv");
        write_points_file(rec.output(&a.out_dir.join(&name)), s)?;
        entries.push(SentinelEntry { file: name, size: s.len(), check: verify_sentinel(s, &d, a.eps, &fam)? });
    }
    let report = a.out_dir.join("report.json");
    write_json(rec.output(&report), &SentinelReport { eps: a.eps, ground_size: d.len(), sets: entries })?;
    Ok(report)
}
