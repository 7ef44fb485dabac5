use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_rational::BigRational;

use qcantor::blocks::Block;
use qcantor::constructions::{check_good_conditions, preset_spec, run_experiment, Manifest, PresetKind, Scale};
use qcantor::descriptor::DescriptorParser;
use qcantor::diophantine::{solve_box, solve_exact, verify_solution, RelationSystem, Solution};
use qcantor::error::{Error, Result};
use qcantor::stats::{geometric_checkpoints, ratio_normality_series};

#[derive(Parser)]
#[command(name = "qcantor", version, about = "Normality statistics and constructions for Cantor series expansions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the descriptors and predicted limits of a named construction as JSON.
    Preset {
        /// factorial, top-order, ap-dichotomy, skip-order-one or ratio-psi.
        name: String,
        /// t for factorial/top-order, k for ap-dichotomy.
        #[arg(long)]
        param: Option<u64>,
        /// Use the exact parameters instead of the desk-scale profile.
        #[arg(long)]
        exact: bool,
        /// Target sequence for ratio-psi.
        #[arg(long)]
        q: Option<String>,
    },
    /// Write digits of a stream, one per line, after a header line.
    GenDigits {
        #[arg(long)]
        construction: String,
        #[arg(long)]
        n: u64,
        /// Descriptor of the governing sequence, recorded in the header.
        #[arg(long)]
        q: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count blocks and emit `n,mode,m,r,block,count,denominator,ratio` CSV.
    Count {
        #[arg(long)]
        x: String,
        #[arg(long)]
        q: String,
        /// Blocks such as `(0,1)`; repeat the flag for several.
        #[arg(long = "block", required = true)]
        blocks: Vec<String>,
        /// `plain`, `apI:m:r` or `apII:m:r`; repeatable.
        #[arg(long = "mode", default_value = "plain")]
        modes: Vec<String>,
        #[arg(long)]
        horizon: u64,
        /// geometric, boundaries, both, or list:n1,n2,...
        #[arg(long, default_value = "geometric")]
        checkpoints: String,
        /// Also write the JSON summary here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Ratios `N(B1)/N(B2)` of two same-length blocks at geometric checkpoints.
    Ratios {
        #[arg(long)]
        x: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        b1: String,
        #[arg(long)]
        b2: String,
        #[arg(long)]
        horizon: u64,
    },
    /// Bounded exact search for `S_k = d` (k in A), `S_k != d` (k in B).
    SolveDioph {
        #[arg(long)]
        t: u64,
        #[arg(long = "A", value_delimiter = ',')]
        a: Vec<u64>,
        #[arg(long = "B", value_delimiter = ',')]
        b: Vec<u64>,
        #[arg(long, default_value_t = 4)]
        max_h: u64,
        #[arg(long, default_value_t = 10)]
        max_d: u64,
        /// Verify a given `c` instead of searching, e.g. `2,1,2`.
        #[arg(long)]
        verify_c: Option<String>,
        #[arg(long)]
        verify_d: Option<u64>,
    },
    /// Newton solve of `S_k = 1 + ε_k` inside the box; CSV of `c` and residuals.
    SolveBox {
        #[arg(long)]
        t: usize,
        /// One value for every k, or t comma-separated values.
        #[arg(long, default_value = "0", value_delimiter = ',')]
        eps: Vec<f64>,
    },
    /// Growth-ratio report of a schedule as JSON.
    CheckGood {
        /// Schedule descriptor, e.g. `preset=factorial;t=2`.
        #[arg(long)]
        schedule: String,
        #[arg(long, default_value_t = 2)]
        k: u64,
        #[arg(long, default_value_t = 1)]
        m: u64,
        #[arg(long, default_value_t = 2)]
        first: usize,
        #[arg(long, default_value_t = 8)]
        last: usize,
    },
    /// Run a manifest and write `ratios.csv` and `summary.json`.
    Run {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))
}

fn manifest_from(pairs: &[(&str, String)]) -> Result<Manifest> {
    let text: String = pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    Manifest::parse(&text)
}

fn execute(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Preset { name, param, exact, q } => {
            let kind: PresetKind = name.parse()?;
            let pv = param.unwrap_or(kind.default_param());
            let scale = if exact {
                Scale::Exact
            } else {
                Scale::Scaled(qcantor::constructions::default_profile(kind, pv)?)
            };
            let spec = preset_spec(kind, Some(pv), scale, q.as_deref())?;
            writeln!(out, "{}", json(&spec)?)?;
        }
        Command::GenDigits { construction, n, q, out: path } => {
            let parser = DescriptorParser::new();
            let x = parser.stream(&construction)?;
            if let Some(q) = &q {
                parser.sequence(q)?;
            }
            let mut text = format!("# construction={construction} sequence={}\n", q.as_deref().unwrap_or("-"));
            let mut cur = x.cursor(1)?;
            for _ in 0..n {
                text.push_str(&cur.next_digit()?.to_string());
                text.push('\n');
            }
            match path {
                Some(p) => std::fs::write(p, text)?,
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Count { x, q, blocks, modes, horizon, checkpoints, json: json_path } => {
            let m = manifest_from(&[
                ("x", x),
                ("q", q),
                ("blocks", blocks.join(";")),
                ("modes", modes.join(";")),
                ("horizon", horizon.to_string()),
                ("checkpoints", checkpoints),
            ])?;
            let bundle = run_experiment(&m)?;
            out.write_all(bundle.csv.as_bytes())?;
            if let Some(p) = json_path {
                std::fs::write(p, json(&bundle.summary)? + "\n")?;
            }
        }
        Command::Ratios { x, q, b1, b2, horizon } => {
            let parser = DescriptorParser::new();
            let (x, q) = (parser.stream(&x)?, parser.sequence(&q)?);
            let parse = |s: &str| s.parse::<Block>().map_err(|_| Error::Descriptor(format!("bad block {s:?}")));
            let rows = ratio_normality_series(&x, &q, &parse(&b1)?, &parse(&b2)?, horizon, &geometric_checkpoints(horizon))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(e.to_string());
            w.write_record(["n", "count_b1", "count_b2", "ratio"]).map_err(io)?;
            for (n, c1, c2, r) in rows {
                w.write_record([n.to_string(), c1.to_string(), c2.to_string(), r.map(|v| v.to_string()).unwrap_or_default()])
                    .map_err(io)?;
            }
            out.write_all(&w.into_inner().map_err(|e| Error::Io(e.to_string()))?)?;
        }
        Command::SolveDioph { t, a, b, max_h, max_d, verify_c, verify_d } => {
            let sys = RelationSystem::new(t, a, b)?;
            match (verify_c, verify_d) {
                (Some(c), Some(d)) => {
                    let c = c
                        .split(',')
                        .map(|v| v.trim().parse::<BigRational>().map_err(|_| Error::Descriptor(format!("bad c entry {v:?}"))))
                        .collect::<Result<Vec<_>>>()?;
                    let cert = verify_solution(&sys, &Solution { c, d });
                    writeln!(out, "{}", json(&cert)?)?;
                    if !cert.pass {
                        return Err(Error::InvalidParameter("solution fails verification".into()));
                    }
                }
                (None, None) => {
                    let outcome = solve_exact(&sys, max_h, max_d);
                    writeln!(out, "{}", json(&outcome)?)?;
                    if outcome.solution.is_none() {
                        eprintln!("no solution with height <= {max_h} and d <= {max_d}");
                    }
                }
                _ => return Err(Error::InvalidParameter("--verify-c and --verify-d go together".into())),
            }
        }
        Command::SolveBox { t, eps } => {
            let eps = if eps.len() == 1 { vec![eps[0]; t] } else { eps };
            let res = solve_box(t, &eps)?;
            writeln!(out, "j,c,residual")?;
            for (j, (c, r)) in res.c.iter().zip(&res.residuals).enumerate() {
                writeln!(out, "{j},{c:e},{r:e}")?;
            }
            eprintln!(
                "status={:?} iterations={} max_residual={:e} in_box={}",
                res.status, res.iterations, res.max_residual, res.in_box
            );
            if let Some(d) = res.free_root_distance {
                eprintln!("unconstrained root lies {d:e} outside the box");
            }
            if !res.converged() {
                return Err(Error::InvalidParameter(format!("box solve did not converge for t = {t}")));
            }
        }
        Command::CheckGood { schedule, k, m, first, last } => {
            let s = DescriptorParser::new().schedule(&schedule)?;
            let report = check_good_conditions(&s, k, m, first, last)?;
            writeln!(out, "{}", json(&report)?)?;
        }
        Command::Run { manifest, out: dir } => {
            let bundle = run_experiment(&Manifest::load(&manifest)?)?;
            bundle.write(&dir)?;
            for w in &bundle.summary.warnings {
                eprintln!("warning: {w}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
