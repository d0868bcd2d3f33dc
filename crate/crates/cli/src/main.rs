//! `qkdnet` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input, 3 resource cap exceeded,
//! 4 internal inconsistency (including a failed protocol check).

mod output;
mod sweep;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qkdnet::protocol::{bits_hex, reconstruct_at_endpoint, run_session, Message};
use qkdnet::routes::{enumerate_routes_capped, DEFAULT_ROUTE_CAP};
use qkdnet::scalar::exact_from_f64;
use qkdnet::security::optimize_density;
use qkdnet::simulator::run_trials_batched;
use qkdnet::topology::edges_csv;
use qkdnet::{
    build_routing_scheme, epsilon_qn, make_segment, route_count, run_trials, Error, ExactProbability, Mode,
    NetworkSegment, SecurityParams,
};
use serde::Serialize;

use output::{csv_writer, fmt_sig, print_json, to_json};
use sweep::{Arith, Param, Quantity, Spacing, SweepSpec};

#[derive(Parser, Debug)]
#[command(name = "qkdnet", version, about = "Failure probabilities and key transport for banded trusted-node QKD segments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exact,
    Approx,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Security report ε₁, ε₂, ε_qn as JSON.
    Analyze {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
        #[arg(long)]
        eps_auth: f64,
        #[arg(long)]
        eps_qkd: f64,
        #[arg(long, value_enum, default_value = "approx")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "f64")]
        arith: Arith,
    },
    /// CSV sweep of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, value_enum)]
        quantity: Option<Quantity>,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long)]
        points: usize,
        #[arg(long, value_enum, default_value = "log")]
        spacing: Spacing,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        c: usize,
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps_auth: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps_qkd: f64,
        #[arg(long, value_enum, default_value = "f64")]
        arith: Arith,
    },
    /// Route count, route list or routing scheme as JSON.
    Routes {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
        #[arg(long, conflicts_with_all = ["enumerate", "scheme"])]
        count_only: bool,
        #[arg(long)]
        enumerate: bool,
        #[arg(long)]
        scheme: bool,
        /// Largest route list that will be materialized.
        #[arg(long, env = "QKDNET_ROUTE_CAP", default_value_t = DEFAULT_ROUTE_CAP)]
        cap: u64,
    },
    /// Link list as CSV.
    Edges {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
    },
    /// Monte Carlo attack simulation; TrialStats as JSON.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
        #[arg(long, default_value_t = 0.0)]
        p_node: f64,
        #[arg(long, default_value_t = 0.0)]
        p_link: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write running estimates to this CSV file.
        #[arg(long)]
        batch_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000, requires = "batch_csv")]
        batch_size: u64,
    },
    /// Real and integer optimum of the connection density.
    OptimizeC {
        #[arg(long)]
        n: usize,
    },
    /// Runs one key-transport session and checks endpoint reconstruction.
    DemoProtocol {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
        #[arg(long, default_value_t = 128)]
        key_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the session as JSON instead of a listing.
        #[arg(long)]
        json: bool,
        /// Flip one ciphertext bit on the last link before reconstruction.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CapExceeded { .. } => 3,
        Error::Inconsistency(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> qkdnet::Result<ExitCode> {
    match cmd {
        Command::Analyze {
            n,
            c,
            eps_auth,
            eps_qkd,
            mode,
            arith,
        } => {
            let seg = make_segment(n, c)?;
            let mode = match mode {
                ModeArg::Exact => Mode::Exact,
                ModeArg::Approx => Mode::Approx,
            };
            let report = match arith {
                Arith::F64 => epsilon_qn(&seg, &SecurityParams::new(eps_auth, eps_qkd)?, mode)?,
                Arith::Exact => {
                    let params = SecurityParams::<ExactProbability>::new(lift("eps_auth", eps_auth)?, lift("eps_qkd", eps_qkd)?)?;
                    epsilon_qn(&seg, &params, mode)?.to_f64()
                }
            };
            print_json(&report);
        }
        Command::Sweep {
            param,
            quantity,
            start,
            stop,
            points,
            spacing,
            n,
            c,
            p,
            eps_auth,
            eps_qkd,
            arith,
        } => {
            let spec = SweepSpec {
                param,
                quantity,
                start,
                stop,
                points,
                spacing,
                n,
                c,
                p,
                eps_auth,
                eps_qkd,
                arith,
            };
            spec.write_csv(io::stdout().lock())?;
        }
        Command::Routes {
            n,
            c,
            count_only,
            enumerate,
            scheme,
            cap,
        } => routes(n, c, !count_only && enumerate, !count_only && scheme, cap)?,
        Command::Edges { n, c } => {
            let _ = io::stdout().lock().write_all(edges_csv(&make_segment(n, c)?).as_bytes());
        }
        Command::Simulate {
            n,
            c,
            p_node,
            p_link,
            trials,
            seed,
            batch_csv,
            batch_size,
        } => {
            let seg = make_segment(n, c)?;
            let stats = match batch_csv {
                None => run_trials(&seg, p_node, p_link, trials, seed)?,
                Some(path) => {
                    let (stats, points) = run_trials_batched(&seg, p_node, p_link, trials, seed, batch_size)?;
                    write_batches(&path, &points)?;
                    stats
                }
            };
            print_json(&stats);
        }
        Command::OptimizeC { n } => print_json(&optimize_density(n)?),
        Command::DemoProtocol {
            n,
            c,
            key_len,
            seed,
            json,
            corrupt,
        } => return demo_protocol(n, c, key_len, seed, json, corrupt),
    }
    Ok(ExitCode::SUCCESS)
}

fn lift(name: &'static str, x: f64) -> qkdnet::Result<ExactProbability> {
    exact_from_f64(x).ok_or_else(|| Error::InvalidParameter {
        name,
        value: x.to_string(),
        bound: "finite".into(),
    })
}

#[derive(Serialize)]
struct RoutesOutput {
    segment: NetworkSegment,
    count: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    routes: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<qkdnet::RoutingScheme>,
}

fn routes(n: usize, c: usize, enumerate: bool, scheme: bool, cap: u64) -> qkdnet::Result<()> {
    let seg = make_segment(n, c)?;
    let mut out = RoutesOutput {
        segment: seg,
        count: route_count(&seg).to_string(),
        routes: None,
        scheme: None,
    };
    if enumerate || scheme {
        let set = enumerate_routes_capped(&seg, cap)?;
        if scheme {
            out.scheme = Some(build_routing_scheme(&set));
        }
        if enumerate {
            out.routes = Some(set.routes.into_iter().map(|r| r.nodes).collect());
        }
    }
    print_json(&out);
    Ok(())
}

fn write_batches(path: &PathBuf, points: &[qkdnet::simulator::BatchPoint]) -> qkdnet::Result<()> {
    let io_err = |e: &dyn std::fmt::Display| Error::InvalidParameter {
        name: "batch_csv",
        value: path.display().to_string(),
        bound: format!("writable file ({e})"),
    };
    let file = File::create(path).map_err(|e| io_err(&e))?;
    let mut w = csv_writer(BufWriter::new(file));
    w.write_record(["trials", "estimate_auth", "stderr_auth", "estimate_link", "stderr_link"])
        .map_err(|e| io_err(&e))?;
    for p in points {
        w.write_record([
            p.trials.to_string(),
            fmt_sig(p.estimate_auth),
            fmt_sig(p.stderr_auth),
            fmt_sig(p.estimate_link),
            fmt_sig(p.stderr_link),
        ])
        .map_err(|e| io_err(&e))?;
    }
    w.flush().map_err(|e| io_err(&e))
}

#[derive(Serialize)]
struct DemoOutput<'a> {
    segment: NetworkSegment,
    key_len: usize,
    seed: u64,
    route_count: usize,
    messages: &'a [Message],
    final_key: String,
    reconstructed_key: Option<String>,
    pass: bool,
}

fn demo_protocol(n: usize, c: usize, key_len: usize, seed: u64, json: bool, corrupt: bool) -> qkdnet::Result<ExitCode> {
    let seg = make_segment(n, c)?;
    let set = enumerate_routes_capped(&seg, DEFAULT_ROUTE_CAP)?;
    let scheme = build_routing_scheme(&set);
    let session = run_session(&seg, &scheme, key_len, seed)?;
    let mut transcript = session.transcript.clone();
    if corrupt {
        let last = transcript.messages.len() - 1;
        transcript.flip_bit(last, 0);
    }
    let reconstructed = reconstruct_at_endpoint(&seg, &scheme, &transcript, &session.keys.keys_of_node(n));
    let pass = matches!(&reconstructed, Ok(k) if *k == session.final_key);
    let reconstructed_key = reconstructed.as_ref().ok().map(|k| bits_hex(k));

    if json {
        println!(
            "{}",
            to_json(&DemoOutput {
                segment: seg,
                key_len,
                seed,
                route_count: scheme.route_count(),
                messages: &transcript.messages,
                final_key: bits_hex(&session.final_key),
                reconstructed_key,
                pass,
            })
        );
    } else {
        let mut out = String::new();
        out += &format!("segment N={n} c={c}, {} routes, key length {key_len} bits\n", scheme.route_count());
        out += &format!("{} messages sent over the open channel:\n", transcript.messages.len());
        for (i, m) in transcript.messages.iter().enumerate() {
            let keys: Vec<String> = m.route_indices.iter().map(|r| format!("K{r}")).collect();
            out += &format!(
                "  {:>3}. ({}) ⊕ k{}-{}  digest {}\n",
                i + 1,
                keys.join(" "),
                m.link.from,
                m.link.to,
                m.digest()
            );
        }
        out += &format!("final key      {}\n", bits_hex(&session.final_key));
        match &reconstructed {
            Ok(k) => out += &format!("reconstructed  {}\n", bits_hex(k)),
            Err(e) => out += &format!("reconstruction error: {e}\n"),
        }
        out += if pass { "PASS\n" } else { "FAIL\n" };
        let _ = io::stdout().lock().write_all(out.as_bytes());
    }
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(4) })
}
