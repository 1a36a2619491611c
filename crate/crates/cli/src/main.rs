//! `parabolica`: command-line entry point.

mod germ_spec;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_rational::Rational64;
use parabolica::annulus::{
    canonical_coordinate, return_map_fixed_points, transition_map, AnnulusField, LoopPoint,
};
use parabolica::circle::{
    are_equivalent, difference_table, is_non_synchronized, search_equivalence, CharacteristicPair, Coordinate, MarkedSet,
};
use parabolica::germ::{Generator, GeneratorOptions};
use parabolica::io::{pair_to_json, parse_pair, ParsedPair};
use parabolica::pipeline::{auto_grid, detect_channels, run_pipeline, PipelineOptions};
use parabolica::realization::{read_back, realize_sphere, validate_skeleton, SvgExport};
use parabolica::unfolding::{self, ModelUnfolding, ScenarioOptions, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use germ_spec::GermSpec;
use output::{csv_header, num, opt_num, with_config, CliError};

#[derive(Parser)]
#[command(name = "parabolica", version, about = "Sparkling saddle connections of parabolic cycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether two characteristic pairs are equivalent.
    Classify(ClassifyArgs),
    /// Report whether characteristic pairs are non-synchronized.
    CheckSync(CheckSyncArgs),
    /// Sparkling-connection parameters from the connection equation (CSV).
    Bifurcations(BifurcationsArgs),
    /// Follow one orbit across the annulus.
    Simulate(SimulateArgs),
    /// Locate sparkling connections by simulation and compare them with the
    /// connection equation (CSV).
    Detect(DetectArgs),
    /// Recover the generator of a parabolic germ and sample it (CSV).
    Germ(GermArgs),
    /// Build the phase-portrait skeleton of a pair.
    Realize(RealizeArgs),
    /// Scenario, realization, detection and cross-validation in one run.
    Pipeline(PipelineArgs),
}

/// Inclusive range written `lo..hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Span<T> {
    lo: T,
    hi: T,
}

impl<T: FromStr + PartialOrd> FromStr for Span<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected lo..hi, got {s:?}"))?;
        let parse = |t: &str| t.trim().parse::<T>().map_err(|_| format!("cannot read {t:?} in range {s:?}"));
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if !(lo <= hi) {
            return Err(format!("empty range {s:?}"));
        }
        Ok(Self { lo, hi })
    }
}

fn loop_point(s: &str) -> Result<LoopPoint, String> {
    let (side, angle) = s.split_once(':').ok_or_else(|| format!("expected C-:angle or C+:angle, got {s:?}"))?;
    let side = match side.trim() {
        "C-" => Side::Minus,
        "C+" => Side::Plus,
        other => return Err(format!("unknown loop {other:?}; use C- or C+")),
    };
    let angle: f64 = angle.trim().parse().map_err(|_| format!("cannot read angle {angle:?}"))?;
    if !angle.is_finite() {
        return Err("angle must be finite".into());
    }
    Ok(LoopPoint::new(side, angle))
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    pair_a: PathBuf,
    pair_b: PathBuf,
    /// Distinctness tolerance for floating-point input.
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
    /// Also try cyclic relabelings of the second pair.
    #[arg(long)]
    search: bool,
}

#[derive(Args, Serialize)]
struct CheckSyncArgs {
    #[arg(required = true)]
    pairs: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
}

#[derive(Args, Serialize)]
struct BifurcationsArgs {
    #[arg(long)]
    pair: PathBuf,
    /// Winding numbers, `lo..hi` inclusive.
    #[arg(long, default_value = "5..30")]
    n: Span<i64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a_coeff: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    b_minus: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    b_plus: f64,
    /// Also write the JSON summary here; printed to stderr otherwise.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long, allow_negative_numbers = true)]
    epsilon: f64,
    /// Start point on `C-`, as `C-:angle` with the angle in turns.
    #[arg(long, value_parser = loop_point, default_value = "C-:0")]
    from: LoopPoint,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a_coeff: f64,
}

#[derive(Args, Serialize)]
struct DetectArgs {
    #[arg(long)]
    pair: PathBuf,
    /// Parameter range `lo..hi`.
    #[arg(long)]
    eps: Span<f64>,
    /// Samples of the detection function; chosen from the range when unset.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Serialize)]
struct GermArgs {
    /// Germ spec as inline JSON or a path to a JSON file.
    spec: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Sampling annulus `r1 <= |x| <= r2`.
    #[arg(long, num_args = 2, value_names = ["R1", "R2"], default_values_t = [0.02, 0.2])]
    domain: Vec<f64>,
    /// Samples per side.
    #[arg(long, default_value_t = 50)]
    samples: usize,
}

#[derive(Args, Serialize)]
struct RealizeArgs {
    #[arg(long)]
    pair: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct PipelineArgs {
    /// Pair file; mutually exclusive with `--random`.
    #[arg(long, required_unless_present = "random", conflicts_with = "random")]
    pair: Option<PathBuf>,
    /// Draw a random non-synchronized pair of singleton sets with sizes `K,M`.
    #[arg(long, value_parser = sizes)]
    random: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "5..20")]
    n: Span<i64>,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long)]
    grid: Option<usize>,
}

fn sizes(s: &str) -> Result<(usize, usize), String> {
    let (k, m) = s.split_once(',').ok_or_else(|| format!("expected K,M, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("cannot read {t:?}"));
    let (k, m) = (parse(k)?, parse(m)?);
    if k == 0 || m == 0 || k > 16 || m > 16 {
        return Err("sizes must lie in 1..=16".into());
    }
    Ok((k, m))
}

fn read_pair(path: &Path) -> Result<ParsedPair, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    parse_pair(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Stdout text and exit code of a completed run.
struct Done {
    stdout: String,
    code: i32,
}

impl Done {
    fn ok(stdout: String) -> Self {
        Self { stdout, code: 0 }
    }
}

fn rational_text(r: Rational64) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn classify(args: &ClassifyArgs) -> Result<Done, CliError> {
    let a = read_pair(&args.pair_a)?;
    let b = read_pair(&args.pair_b)?;
    let exact = a.exact.as_ref().zip(b.exact.as_ref());
    let (sync_a, sync_b) = match exact {
        Some((ea, eb)) => (
            is_non_synchronized(ea, Rational64::from_integer(0)).non_synchronized,
            is_non_synchronized(eb, Rational64::from_integer(0)).non_synchronized,
        ),
        None => (
            is_non_synchronized(&a.float, args.tolerance).non_synchronized,
            is_non_synchronized(&b.float, args.tolerance).non_synchronized,
        ),
    };
    let mut body = json!({
        "arithmetic": if exact.is_some() { "exact" } else { "float" },
        "non_synchronized": [sync_a, sync_b],
        "equivalent": false,
        "shift": null,
    });
    let verdict = |reason: &str, mut body: serde_json::Value| {
        body["reason"] = json!(reason);
        body
    };
    if a.float.sizes() != b.float.sizes() {
        return Ok(Done::ok(with_config(args, verdict("size", body))));
    }
    if !(sync_a && sync_b) {
        // equivalence is only defined for non-synchronized pairs
        return Ok(Done {
            stdout: with_config(args, verdict("synchronized", body)),
            code: output::VALIDATION,
        });
    }
    match exact {
        Some((ea, eb)) => {
            let found = if args.search {
                search_equivalence(ea, eb, Rational64::from_integer(0))?.map(|(al, s)| (Some(al), s))
            } else {
                are_equivalent(ea, eb, Rational64::from_integer(0))?.map(|s| (None, s))
            };
            if let Some((alignment, shift)) = found {
                body["equivalent"] = json!(true);
                body["shift"] = json!(shift.to_f64());
                body["shift_exact"] = json!(rational_text(shift));
                if let Some(al) = alignment {
                    body["alignment"] = json!({"plus": al.plus, "minus": al.minus});
                }
            }
        }
        None => {
            let found = if args.search {
                search_equivalence(&a.float, &b.float, args.tolerance)?.map(|(al, s)| (Some(al), s))
            } else {
                are_equivalent(&a.float, &b.float, args.tolerance)?.map(|s| (None, s))
            };
            if let Some((alignment, shift)) = found {
                body["equivalent"] = json!(true);
                body["shift"] = json!(shift);
                if let Some(al) = alignment {
                    body["alignment"] = json!({"plus": al.plus, "minus": al.minus});
                }
            }
        }
    }
    if body["equivalent"] == json!(false) {
        body = verdict("order", body);
    }
    Ok(Done::ok(with_config(args, body)))
}

fn sync_entry<C: Coordinate>(pair: &CharacteristicPair<C>, tolerance: C) -> serde_json::Value {
    let verdict = is_non_synchronized(pair, tolerance);
    json!({
        "non_synchronized": verdict.non_synchronized,
        "witness": verdict.witness.map(|(p, q)| [[p.0, p.1], [q.0, q.1]]),
        "min_gap": difference_table(pair).min_gap().map(|g| g.to_f64()),
    })
}

fn check_sync(args: &CheckSyncArgs) -> Result<Done, CliError> {
    let mut entries = Vec::new();
    for path in &args.pairs {
        let parsed = read_pair(path)?;
        let mut entry = match &parsed.exact {
            Some(exact) => sync_entry(exact, Rational64::from_integer(0)),
            None => sync_entry(&parsed.float, args.tolerance),
        };
        entry["file"] = json!(path);
        entries.push(entry);
    }
    Ok(Done::ok(with_config(args, json!({ "pairs": entries }))))
}

fn bifurcations(args: &BifurcationsArgs) -> Result<Done, CliError> {
    let pair = read_pair(&args.pair)?.float;
    let model = ModelUnfolding::new(args.a_coeff, args.b_minus, args.b_plus)?;
    let options = ScenarioOptions {
        verify: false,
        ..ScenarioOptions::default()
    };
    let scenario = unfolding::scenario_with(&model, &pair, args.n.lo, args.n.hi, &options)?;
    let order = scenario.check_order();
    let mut csv = csv_header("bifurcations", args);
    csv.push_str("k,m,n,epsilon\n");
    for e in scenario.events() {
        csv.push_str(&format!("{},{},{},{}\n", e.k, e.m, e.n, num(e.epsilon)));
    }
    let summary = with_config(
        args,
        json!({
            "events": scenario.events().len(),
            "eps_max": scenario.eps_max(),
            "minus_shift": scenario.minus_shift(),
            "max_residual": scenario.max_residual(),
            "order": order,
            "passed": order.passed(),
        }),
    );
    match &args.summary {
        Some(path) => write_file(path, &summary)?,
        None => eprint!("{summary}"),
    }
    Ok(Done {
        stdout: csv,
        code: if order.passed() { 0 } else { output::INVARIANT },
    })
}

fn simulate(args: &SimulateArgs) -> Result<Done, CliError> {
    if args.from.side != Side::Minus {
        return Err(CliError::validation("orbits are followed from C-; use --from C-:angle"));
    }
    let field = AnnulusField::new(args.epsilon).with_coefficient(args.a_coeff);
    if args.epsilon < 0.0 {
        let fixed: Vec<_> = return_map_fixed_points(&field)?
            .into_iter()
            .map(|p| json!({"x": p.x, "multiplier": p.multiplier}))
            .collect();
        return Ok(Done::ok(with_config(args, json!({ "return_map_fixed_points": fixed }))));
    }
    let start = canonical_coordinate(&field, args.from)?;
    let transit = transition_map(&field, args.from)?;
    let landing = canonical_coordinate(&field, transit.landing)?;
    let tau = unfolding::tau(&field.model(), args.epsilon)?;
    let d = (landing.phi - start.phi + tau).frac();
    let residual = if d > 0.5 { d - 1.0 } else { d };
    let passed = residual.abs() < 1e-7;
    let body = json!({
        "start": args.from,
        "landing": transit.landing,
        "alpha_end": transit.alpha_end,
        "turns": transit.turns,
        "phi_start": start,
        "phi_landing": landing,
        "tau": tau,
        "rotation_check": {"residual": residual, "tolerance": 1e-7, "passed": passed},
    });
    Ok(Done {
        stdout: with_config(args, body),
        code: if passed { 0 } else { output::INVARIANT },
    })
}

#[derive(Serialize)]
struct DetectConfig<'a> {
    #[serde(flatten)]
    args: &'a DetectArgs,
    grid_used: usize,
    n_analytic: Span<i64>,
    minus_shift: f64,
}

fn detect(args: &DetectArgs) -> Result<Done, CliError> {
    let pair = read_pair(&args.pair)?.float;
    let (lo, hi) = (args.eps.lo, args.eps.hi);
    if !(lo > 0.0 && hi.is_finite()) {
        return Err(CliError::validation("epsilon range must be positive and finite"));
    }
    let sphere = realize_sphere(&pair)?;
    let model = ModelUnfolding::standard(sphere.annulus.a_coeff);
    // windings whose every channel has its root inside the range
    let n_lo = (unfolding::tau(&model, hi)? + 1.0).ceil() as i64;
    let n_hi = unfolding::tau(&model, lo)?.floor() as i64;
    let options = ScenarioOptions {
        verify: false,
        ..ScenarioOptions::default()
    };
    let scenario = if n_lo <= n_hi {
        Some(unfolding::scenario_with(&model, &pair, n_lo, n_hi, &options)?)
    } else {
        None
    };
    let minus_shift = scenario.as_ref().map_or(0.0, |s| s.minus_shift());
    let grid = args.grid.unwrap_or_else(|| auto_grid(lo, hi));
    let detected = detect_channels(&sphere.annulus, minus_shift, (lo, hi), grid)?;

    let config = DetectConfig {
        args,
        grid_used: grid,
        n_analytic: Span { lo: n_lo, hi: n_hi },
        minus_shift,
    };
    let mut csv = csv_header("detect", &config);
    csv.push_str("k,m,n,epsilon_detected,epsilon_analytic,rel_err\n");
    let mut rows: Vec<(usize, usize, i64, Option<f64>, Option<f64>)> = detected
        .iter()
        .map(|d| {
            let analytic = scenario.as_ref().and_then(|s| s.event(d.k, d.m, d.n)).map(|e| e.epsilon);
            (d.k, d.m, d.n, Some(d.epsilon), analytic)
        })
        .collect();
    if let Some(s) = &scenario {
        for e in s.events() {
            if !detected.iter().any(|d| (d.k, d.m, d.n) == (e.k, e.m, e.n)) {
                rows.push((e.k, e.m, e.n, None, Some(e.epsilon)));
            }
        }
    }
    let key = |r: &(usize, usize, i64, Option<f64>, Option<f64>)| r.3.or(r.4).unwrap_or(0.0);
    rows.sort_by(|a, b| key(b).total_cmp(&key(a)).then((a.0, a.1, a.2).cmp(&(b.0, b.1, b.2))));
    let mut missing = 0;
    for (k, m, n, found, analytic) in rows {
        missing += usize::from(found.is_none());
        let rel = found.zip(analytic).map(|(d, a)| ((d - a) / a).abs());
        csv.push_str(&format!("{k},{m},{n},{},{},{}\n", opt_num(found), opt_num(analytic), opt_num(rel)));
    }
    Ok(Done {
        stdout: csv,
        code: if missing == 0 { 0 } else { output::INVARIANT },
    })
}

fn germ(args: &GermArgs) -> Result<Done, CliError> {
    let spec = GermSpec::load(&args.spec)?;
    let (r1, r2) = (args.domain[0], args.domain[1]);
    if !(0.0 < r1 && r1 < r2) {
        return Err(CliError::validation("domain needs 0 < r1 < r2"));
    }
    if !(args.tol > 0.0) || args.samples < 2 {
        return Err(CliError::validation("tol must be positive and samples at least 2"));
    }
    let germ = spec.germ()?;
    if r2 >= germ.domain_radius() {
        return Err(CliError::validation(format!(
            "r2 = {r2} must stay below the germ's domain radius {}",
            germ.domain_radius()
        )));
    }
    let options = GeneratorOptions {
        tol: args.tol,
        inner: r1,
        outer: r2,
        chart_radius: r2.max(GeneratorOptions::default().chart_radius),
        ..GeneratorOptions::default()
    };
    let u = Generator::recover(&germ, &options)?;

    #[derive(Serialize)]
    struct Config<'a> {
        #[serde(flatten)]
        args: &'a GermArgs,
        germ: &'a GermSpec,
        normal_coefficient: f64,
        flow_error: Option<f64>,
    }
    let config = Config {
        args,
        germ: &spec,
        normal_coefficient: u.normal_coefficient(),
        flow_error: u.flow_error(),
    };
    let mut csv = csv_header("germ", &config);
    csv.push_str("x,u\n");
    let n = args.samples;
    let radii: Vec<f64> = (0..n).map(|i| r1 + (r2 - r1) * i as f64 / (n - 1) as f64).collect();
    let xs = radii.iter().rev().map(|r| -r).chain(radii.iter().copied());
    for x in xs {
        csv.push_str(&format!("{},{}\n", num(x), num(u.try_value(x)?)));
    }
    Ok(Done::ok(csv))
}

fn realize(args: &RealizeArgs) -> Result<Done, CliError> {
    let pair = read_pair(&args.pair)?.float;
    let sphere = realize_sphere(&pair)?;
    let report_minus = validate_skeleton(&sphere.disc_minus);
    let report_plus = validate_skeleton(&sphere.disc_plus);
    let read_back_ok = read_back(&sphere.disc_minus).ok().as_ref() == Some(&pair.minus)
        && read_back(&sphere.disc_plus).ok().as_ref() == Some(&pair.plus);
    if let Some(path) = &args.json {
        let mut text = serde_json::to_string_pretty(&sphere.to_json()).expect("skeleton serializes");
        text.push('\n');
        write_file(path, &text)?;
    }
    if let Some(path) = &args.svg {
        write_file(path, &sphere.to_svg())?;
    }
    let passed = report_minus.passed() && report_plus.passed() && read_back_ok;
    let count = |g: &parabolica::realization::SkeletonGraph| {
        json!({
            "saddles": g.saddle_count(),
            "attractors": g.attractor_count(),
            "separatrices": g.separatrix_count(),
            "faces": g.faces.len(),
        })
    };
    let body = json!({
        "pair": pair_to_json(&pair),
        "disc_minus": {"counts": count(&sphere.disc_minus), "checks": report_minus},
        "disc_plus": {"counts": count(&sphere.disc_plus), "checks": report_plus},
        "read_back_matches": read_back_ok,
        "passed": passed,
    });
    Ok(Done {
        stdout: with_config(args, body),
        code: if passed { 0 } else { output::INVARIANT },
    })
}

/// Singleton sets of sizes `k` and `m` whose differences are at least
/// `1e-3` apart on the circle.
fn random_pair(seed: u64, k: usize, m: usize) -> CharacteristicPair<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut draw = |count: usize| {
            let mut pts: Vec<f64> = (0..count).map(|_| (rng.gen::<f64>() * 1e6).round() / 1e6).collect();
            pts.sort_by(f64::total_cmp);
            pts
        };
        let (plus, minus) = (draw(k), draw(m));
        let (Ok(plus), Ok(minus)) = (MarkedSet::singletons(&plus), MarkedSet::singletons(&minus)) else {
            continue;
        };
        let pair = CharacteristicPair::new(plus, minus);
        if is_non_synchronized(&pair, 1e-3).non_synchronized {
            return pair;
        }
    }
}

fn pipeline(args: &PipelineArgs) -> Result<Done, CliError> {
    let pair = match (&args.pair, args.random) {
        (Some(path), _) => read_pair(path)?.float,
        (None, Some((k, m))) => random_pair(args.seed, k, m),
        (None, None) => unreachable!("clap requires --pair or --random"),
    };
    let options = PipelineOptions {
        n_lo: args.n.lo,
        n_hi: args.n.hi,
        rel_tol: args.rel_tol,
        grid: args.grid,
    };
    let report = run_pipeline(&pair, &options)?;
    let passed = report.passed;
    let body = json!({ "pair": pair_to_json(&pair), "report": report });
    Ok(Done {
        stdout: with_config(args, body),
        code: if passed { 0 } else { output::INVARIANT },
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("PARABOLICA_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("PARABOLICA_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::validation(e.to_string()))
}

fn run(cli: &Cli) -> Result<Done, CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Classify(a) => classify(a),
        Command::CheckSync(a) => check_sync(a),
        Command::Bifurcations(a) => bifurcations(a),
        Command::Simulate(a) => simulate(a),
        Command::Detect(a) => detect(a),
        Command::Germ(a) => germ(a),
        Command::Realize(a) => realize(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(output::VALIDATION as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(done) => {
            print!("{}", done.stdout);
            ExitCode::from(done.code as u8)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code as u8)
        }
    }
}
