use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use dkseq::discrepancy::{
    local_grid_values, localize_failure, star_discrepancy_grid, DigitPairing, DiscrepancyReport, PointSetView,
    SpectralTable,
};
use dkseq::gf_poly::{Polynomial, Prime};
use dkseq::metrical::{
    certify_witness, measure_exact, measure_mm, measure_monte_carlo, measure_pair_product, tilde_pair_measure, witness_search, Event,
    EventSpec, MeasureEstimate, PSetFilter, PairProduct, TildePairReport, WitnessCertificate, WitnessSearch,
};
use dkseq::sequence::{classical_kronecker, generate_block, grid_numerators, index_digits, DigitalKroneckerConfig};
use dkseq::suite;
use dkseq::walsh::walsh_suite;
use serde::Serialize;

use crate::config::{self, Envelope, ModeChoice, Provenance, RunConfig};
use crate::{Cli, Command, Format, MethodArg};

/// Relative tolerance between the Walsh and counting routes.
const ROUTE_TOL: f64 = 1e-9;

struct Ctx<'a> {
    cli: &'a Cli,
    config: RunConfig,
    hash: String,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.cli.opts.seed.unwrap_or(0)
    }

    fn provenance(&self, command: &str) -> Provenance {
        Provenance {
            tool: "dkseq",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config_sha256: self.hash.clone(),
            seed: self.seed(),
        }
    }

    fn m(&self) -> Option<usize> {
        self.cli.opts.m.or(self.config.m)
    }

    fn n(&self) -> Option<u64> {
        self.cli.opts.n.or(self.config.n)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.cli.opts.out {
            Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    fn emit_json<T: Serialize>(&self, command: &str, report: T) -> Result<()> {
        let env = Envelope { provenance: self.provenance(command), report };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.emit(&text)
    }

    fn format(&self, default: Format) -> Format {
        self.cli.opts.format.unwrap_or(default)
    }

    fn sequence(&self, m: usize, max_n: u64) -> Result<DigitalKroneckerConfig> {
        let q = self.config.prime()?;
        let fs = self.config.series(self.cli.opts.seed)?;
        Ok(DigitalKroneckerConfig::new(q, fs, m, max_n)?)
    }
}

/// `Ok(true)` on success, `Ok(false)` when a checked property fails.
pub fn run(cli: &Cli) -> Result<bool> {
    let loaded = config::load(cli.opts.config.as_deref())?;
    let ctx = Ctx { cli, config: loaded.config, hash: loaded.hash };
    match &cli.command {
        Command::Generate => generate(&ctx),
        Command::Discrepancy { method, pairing } => discrepancy(&ctx, *method, pairing.as_deref()),
        Command::WalshCheck => walsh_check(&ctx),
        Command::Measure => measure(&ctx),
        Command::Witness => witness(&ctx),
        Command::Integrate { integrand } => integrate(&ctx, integrand.as_deref()),
        Command::Suite { only } => run_suite(&ctx, only),
    }
}

fn required_n(ctx: &Ctx) -> Result<u64> {
    match ctx.n() {
        None => bail!("the number of points N is required (--N or \"N\" in the config)"),
        Some(0) => bail!("N must be at least 1"),
        Some(n) => Ok(n),
    }
}

fn digit_string(digits: &[u32]) -> String {
    digits.iter().map(|d| char::from_digit(*d, 36).unwrap_or('?')).collect()
}

fn generate(ctx: &Ctx) -> Result<bool> {
    let n = required_n(ctx)?;
    let m = ctx.m().unwrap_or(10);
    let cfg = ctx.sequence(m, n)?;
    let points = generate_block(&cfg, n)?;
    match ctx.format(Format::Csv) {
        Format::Csv => {
            let s = cfg.s();
            let mut out = String::from("n");
            for j in 1..=s {
                write!(out, ",x{j}")?;
            }
            for j in 1..=s {
                write!(out, ",digits{j}")?;
            }
            out.push('\n');
            for (i, p) in points.iter().enumerate() {
                write!(out, "{i}")?;
                for c in &p.coords {
                    write!(out, ",{c:?}")?;
                }
                for d in &p.digits {
                    write!(out, ",{}", digit_string(d))?;
                }
                out.push('\n');
            }
            ctx.emit(&out)?;
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                n: u64,
                coords: Vec<f64>,
                digits: Vec<String>,
            }
            let rows: Vec<Row> = points
                .iter()
                .enumerate()
                .map(|(i, p)| Row {
                    n: i as u64,
                    coords: p.coords.clone(),
                    digits: p.digits.iter().map(|d| digit_string(d)).collect(),
                })
                .collect();
            ctx.emit_json("generate", rows)?;
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct WalshSummary {
    /// Max of `|D(x, N)|` over `Q^s(q^m)` from the Walsh expansion.
    open_grid_max: f64,
    argmax: Vec<u64>,
    max_imaginary: f64,
    pairing: DigitPairing,
}

#[derive(Serialize)]
struct DiscrepancyOutput {
    brute: Option<DiscrepancyReport>,
    walsh: Option<WalshSummary>,
    max_route_deviation: Option<f64>,
    routes_agree: Option<bool>,
    localization: Option<String>,
}

fn grid_index_to_point(mut idx: usize, side: u64, s: usize) -> Vec<u64> {
    (0..s)
        .map(|_| {
            let v = idx as u64 % side;
            idx /= side as usize;
            v
        })
        .collect()
}

fn discrepancy(ctx: &Ctx, method: MethodArg, pairing_flag: Option<&str>) -> Result<bool> {
    let n = required_n(ctx)?;
    let q = ctx.config.prime()?;
    let m = match ctx.m() {
        Some(m) => m,
        None => index_digits(q, n + 1),
    };
    let cfg = ctx.sequence(m, n.max(q.pow(m as u32)))?;
    if n >= q.pow(m as u32) && method != MethodArg::Brute {
        bail!("the Walsh route needs N < q^m");
    }
    let pairing = match pairing_flag {
        Some(p) => p.parse()?,
        None => ctx.config.pairing.unwrap_or_default(),
    };
    let budget = ctx.cli.opts.budget_grid;
    let view = PointSetView::from_config(&cfg, n)?;
    let mut out =
        DiscrepancyOutput { brute: None, walsh: None, max_route_deviation: None, routes_agree: None, localization: None };
    if method != MethodArg::Walsh {
        out.brute = Some(star_discrepancy_grid(&view, n, budget)?);
    }
    let mut ok = true;
    if method != MethodArg::Brute {
        let table = SpectralTable::new(&cfg, pairing, budget)?;
        let grid = table.grid(n)?;
        let side = q.pow(m as u32);
        let (mut best, mut arg, mut imag) = (0.0f64, 0usize, 0.0f64);
        for (i, v) in grid.iter().enumerate() {
            if v.re.abs() > best {
                best = v.re.abs();
                arg = i;
            }
            imag = imag.max(v.im.abs());
        }
        out.walsh = Some(WalshSummary {
            open_grid_max: best,
            argmax: grid_index_to_point(arg, side, cfg.s()),
            max_imaginary: imag,
            pairing,
        });
        if method == MethodArg::Both {
            let direct = local_grid_values(&view, n, budget)?;
            let dev = direct.iter().zip(&grid).map(|(d, w)| (w - d).norm()).fold(0.0, f64::max);
            let agree = dev <= ROUTE_TOL * n.max(1) as f64;
            out.max_route_deviation = Some(dev);
            out.routes_agree = Some(agree);
            if !agree {
                ok = false;
                let loc = localize_failure(&table, &view, ROUTE_TOL)?;
                let text = match loc {
                    Some(l) => format!("spectral and counting routes disagree at {l}"),
                    None => "spectral and counting routes disagree; no single G term isolated".into(),
                };
                eprintln!("{text}");
                out.localization = Some(text);
            }
        }
    }
    ctx.emit_json("discrepancy", out)?;
    Ok(ok)
}

fn walsh_check(ctx: &Ctx) -> Result<bool> {
    let q = ctx.config.prime()?;
    let m = ctx.m().unwrap_or(3) as u32;
    let rep = walsh_suite(q, m, 8, m, m, ctx.seed())?;
    let passed = rep.passed();
    ctx.emit_json("walsh-check", &rep)?;
    Ok(passed)
}

#[derive(Serialize)]
struct EventEcho {
    q: u32,
    ks: Vec<u64>,
    m: Option<u32>,
    betas: Option<Vec<u64>>,
}

#[derive(Serialize)]
struct MeasureOutput {
    event: EventEcho,
    estimate: Option<MeasureEstimate>,
    pair: Option<PairProduct>,
    tilde: Option<TildePairReport>,
}

fn polys(ks: &[u64], q: Prime) -> Vec<Polynomial> {
    ks.iter().map(|&k| Polynomial::from_int(k, q)).collect()
}

fn measure(ctx: &Ctx) -> Result<bool> {
    let q = ctx.config.prime()?;
    let ks = ctx.config.ks.clone().ok_or_else(|| anyhow!("config needs \"ks\""))?;
    let budget = ctx.cli.opts.budget_grid.min(1 << 30);
    let m = ctx.m().map(|m| m as u32);
    let mut out = MeasureOutput {
        event: EventEcho { q: q.get(), ks: ks.clone(), m, betas: ctx.config.betas.clone() },
        estimate: None,
        pair: None,
        tilde: None,
    };
    let mut ok = true;
    if let Some(betas) = &ctx.config.betas {
        let rep = tilde_pair_measure(&polys(&ks, q), &polys(betas, q), budget)?;
        ok &= rep.matches;
        out.tilde = Some(rep);
    } else {
        let m = m.ok_or_else(|| anyhow!("the threshold m is required (--m or \"m\")"))?;
        let spec = EventSpec::m_m(polys(&ks, q), m)?;
        let samples = ctx.cli.opts.budget_samples;
        out.estimate = Some(match ctx.config.mode.unwrap_or(ModeChoice::Auto) {
            ModeChoice::Auto => measure_mm(&spec, budget, samples, ctx.seed())?,
            ModeChoice::Exact => measure_exact(&spec, budget)?,
            ModeChoice::MonteCarlo => measure_monte_carlo(&spec, samples, ctx.seed())?,
        });
        if let Some(other) = &ctx.config.pair_with {
            let first = Event::new(polys(&ks, q), m)?;
            let second = Event::new(polys(&other.ks, q), other.m)?;
            out.pair = Some(measure_pair_product(&first, &second, budget)?);
        }
    }
    ctx.emit_json("measure", out)?;
    Ok(ok)
}

#[derive(Serialize)]
struct WitnessOutput {
    search: WitnessSearch,
    certificates: Vec<WitnessCertificate>,
    failures: Vec<String>,
}

fn witness(ctx: &Ctx) -> Result<bool> {
    let q = ctx.config.prime()?;
    let s = ctx.config.s.or(ctx.config.fs.as_ref().map(Vec::len)).unwrap_or(1);
    let j = ctx.cli.opts.j_trunc.or(ctx.config.j_trunc).unwrap_or(2);
    let r = ctx.cli.opts.r_max.or(ctx.config.r_max).unwrap_or(14);
    let filter = PSetFilter::new(q, s, j, r)?;
    let fs = match &ctx.config.fs {
        Some(_) => ctx.config.series(ctx.cli.opts.seed)?,
        None => suite::witness_series(&filter, ctx.seed())?,
    };
    let search = witness_search(&fs, &filter)?;
    let pairing = ctx.config.pairing.unwrap_or_default();
    let mut certificates = Vec::new();
    let mut failures = Vec::new();
    for w in &search.witnesses {
        match certify_witness(&fs, w, j as u64, pairing, ctx.cli.opts.budget_grid) {
            Ok(c) => {
                if c.lambda.max_abs_d <= 0.0 {
                    failures.push(format!("witness {:?}: D vanishes on the grid", w.ks));
                }
                certificates.push(c);
            }
            Err(e @ dkseq::Error::RouteDisagreement { .. }) => failures.push(format!("witness {:?}: {e}", w.ks)),
            Err(e) => return Err(e.into()),
        }
    }
    let mut csv = format!("{}\n", WitnessCertificate::CSV_HEADER);
    for c in &certificates {
        csv.push_str(&c.csv_row());
        csv.push('\n');
    }
    let ok = failures.is_empty();
    match ctx.format(Format::Json) {
        Format::Csv => ctx.emit(&csv)?,
        Format::Json => {
            if let Some(path) = &ctx.cli.opts.out {
                std::fs::write(path.with_extension("csv"), &csv)?;
            }
            ctx.emit_json("witness", WitnessOutput { search, certificates, failures })?;
        }
    }
    Ok(ok)
}

/// One-dimensional factor and its integral over `[0, 1)`.
type Integrand = (fn(f64) -> f64, f64);

/// Product of one-dimensional test functions with known integrals.
fn integrand(name: &str) -> Result<Integrand> {
    Ok(match name {
        "const" => (|_| 1.0, 1.0),
        "linear" => (|x| x, 0.5),
        "exp" => (f64::exp, std::f64::consts::E - 1.0),
        "cos" => (f64::cos, 1f64.sin()),
        other => bail!("unknown integrand {other:?} (expected const, linear, exp or cos)"),
    })
}

#[derive(Serialize)]
struct IntegrationRow {
    n: u64,
    digital: f64,
    digital_error: f64,
    classical: f64,
    classical_error: f64,
}

fn integrate(ctx: &Ctx, flag: Option<&str>) -> Result<bool> {
    let name = flag.or(ctx.config.integrand.as_deref()).unwrap_or("linear");
    let (f, one_dim) = integrand(name)?;
    let n_max = required_n(ctx)?;
    let q = ctx.config.prime()?;
    let m = ctx.m().unwrap_or(16);
    let cfg = ctx.sequence(m, n_max)?;
    let s = cfg.s();
    let exact = one_dim.powi(s as i32);
    let alphas: Vec<f64> = match &ctx.config.alphas {
        Some(a) if a.len() == s => a.clone(),
        Some(a) => bail!("{} alphas for dimension {s}", a.len()),
        None => [2.0f64, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0].iter().take(s).map(|p| p.sqrt()).collect(),
    };
    if alphas.len() < s {
        bail!("no default classical baseline beyond dimension {}", alphas.len());
    }
    let numerators = grid_numerators(&cfg, n_max)?;
    let side = q.pow(m as u32) as f64;
    let mut ns: Vec<u64> = std::iter::successors(Some(1u64), |&v| v.checked_mul(q.get() as u64))
        .take_while(|&v| v < n_max)
        .collect();
    ns.push(n_max);
    let mut rows = Vec::new();
    let (mut dsum, mut csum, mut done) = (0.0, 0.0, 0u64);
    for &n in &ns {
        while done < n {
            let i = done as usize;
            dsum += numerators[i * s..(i + 1) * s].iter().map(|&c| f(c as f64 / side)).product::<f64>();
            csum += classical_kronecker(&alphas, done).into_iter().map(f).product::<f64>();
            done += 1;
        }
        let (d, c) = (dsum / n as f64, csum / n as f64);
        rows.push(IntegrationRow {
            n,
            digital: d,
            digital_error: (d - exact).abs(),
            classical: c,
            classical_error: (c - exact).abs(),
        });
    }
    match ctx.format(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("N,digital,digital_error,classical,classical_error\n");
            for r in &rows {
                writeln!(out, "{},{:?},{:?},{:?},{:?}", r.n, r.digital, r.digital_error, r.classical, r.classical_error)?;
            }
            ctx.emit(&out)?;
        }
        Format::Json => ctx.emit_json("integrate", rows)?,
    }
    Ok(true)
}

fn run_suite(ctx: &Ctx, only: &[usize]) -> Result<bool> {
    let ids: Vec<usize> = if only.is_empty() { (1..=suite::CRITERIA).collect() } else { only.to_vec() };
    if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > suite::CRITERIA) {
        bail!("no criterion {bad}");
    }
    let results: Vec<suite::CriterionResult> = ids.into_iter().map(suite::run_criterion).collect();
    for r in &results {
        eprintln!("{}", r.line());
    }
    let dir = ctx.cli.opts.out.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
    if ctx.cli.opts.out.is_some() {
        for r in &results {
            for (name, body) in &r.artifacts {
                std::fs::write(dir.join(name), body)?;
            }
        }
    }
    let passed = results.iter().all(|r| r.passed);
    ctx.emit_json("suite", suite::SuiteReport { criteria: results })?;
    Ok(passed)
}
