use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chiral_qnet::dephase::{cj_infidelity_dephased, DephasingParams};
use chiral_qnet::netsim::{self, ChainConfig, LinkModel, RNG_ALGORITHM};
use chiral_qnet::parity::{
    cj_fidelity_closed_form, cj_infidelity_closed_form, cj_infidelity_resonant, success_prob_closed_form, ParityKind,
    Protocol,
};
use chiral_qnet::protocols::{purify_pairs, teleported_cz_choi, PairState, ParityImpl};
use chiral_qnet::pulse::{cj_infidelity_asymptote, pulse_report, PulseSpec, QuadSpec};
use chiral_qnet::scatter::{transmission, EmitterParams};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

/// Parity-measurement sweeps and network protocol runs, written as CSV.
#[derive(Parser, Debug)]
#[command(name = "qnet", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// P and 1-F_CJ of both protocols versus β for resonant emitters.
    #[command(args_override_self = true)]
    SweepBeta(SweepBeta),
    /// 1-F_CJ of both protocols versus mutual detuning Δ = -Δ0 = Δ1.
    #[command(args_override_self = true)]
    SweepDetuning(SweepDetuning),
    /// Two-click F_CJ over the (Δ0, Δ1) plane.
    #[command(args_override_self = true)]
    DetuningGrid(DetuningGrid),
    /// Finite-bandwidth infidelity against its small-σ asymptote.
    #[command(args_override_self = true)]
    Pulse(PulseCmd),
    /// 1-F_CJ versus the incoherent-scattering fraction.
    #[command(args_override_self = true)]
    Dephasing(DephasingCmd),
    /// Repeated purification of identical Werner pairs.
    #[command(args_override_self = true)]
    Purify(PurifyCmd),
    /// Teleported CZ gate report.
    #[command(args_override_self = true)]
    Cz(CzCmd),
    /// Monte Carlo repeater chain.
    #[command(args_override_self = true)]
    Chain(ChainCmd),
}

#[derive(Args, Debug)]
struct Common {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// File of `key = value` lines, one per flag. Flags on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepBeta {
    #[arg(long, default_value_t = 0.5)]
    from: f64,
    #[arg(long, default_value_t = 1.0)]
    to: f64,
    #[arg(long, default_value_t = 51)]
    points: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepDetuning {
    /// Δ/Γ_R range.
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    #[arg(long, default_value_t = 0.5)]
    to: f64,
    #[arg(long, default_value_t = 51)]
    points: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DetuningGrid {
    /// Range of both Δ0/Γ_R and Δ1/Γ_R.
    #[arg(long, default_value_t = -0.2, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 41)]
    points: usize,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum ProtocolArg {
    OneClick,
    TwoClick,
    Both,
}

impl ProtocolArg {
    fn protocols(self) -> Vec<Protocol> {
        match self {
            ProtocolArg::OneClick => vec![Protocol::OneClick],
            ProtocolArg::TwoClick => vec![Protocol::TwoClick],
            ProtocolArg::Both => Protocol::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Spacing {
    Linear,
    Log,
}

#[derive(Args, Debug)]
struct PulseCmd {
    /// A single σ/Γ0; overrides the range.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    from: f64,
    #[arg(long, default_value_t = 1e-2)]
    to: f64,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Log)]
    spacing: Spacing,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Both)]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta1: f64,
    /// Γ0, or Γ0,Γ1 for unequal emitters.
    #[arg(long, value_delimiter = ',', num_args = 1..=2, default_value = "1.0")]
    gamma_r: Vec<f64>,
    /// Initial quadrature panels over the core.
    #[arg(long, default_value_t = QuadSpec::default().n_points)]
    quad_panels: usize,
    /// Core half-width in units of σ.
    #[arg(long, default_value_t = QuadSpec::default().cutoff)]
    quad_cutoff: f64,
    /// Allowed change when the panel count is doubled.
    #[arg(long, default_value_t = QuadSpec::default().tol)]
    quad_tol: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DephasingCmd {
    /// Range of γ_inc/(Γ_R+γ_inc).
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    #[arg(long, default_value_t = 0.1)]
    to: f64,
    #[arg(long, default_value_t = 11)]
    points: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum ParityArg {
    Ideal,
    OneClick,
    TwoClick,
}

#[derive(Args, Debug)]
struct ParityArgs {
    #[arg(long, value_enum, default_value_t = ParityArg::TwoClick)]
    protocol: ParityArg,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta1: f64,
    /// Use the dephasing model with this incoherent fraction instead of β and Δ.
    #[arg(long)]
    inc_fraction: Option<f64>,
}

impl ParityArgs {
    fn parity(&self) -> Result<ParityImpl> {
        let protocol = match self.protocol {
            ParityArg::Ideal => return Ok(ParityImpl::Ideal),
            ParityArg::OneClick => Protocol::OneClick,
            ParityArg::TwoClick => Protocol::TwoClick,
        };
        if let Some(f) = self.inc_fraction {
            let d = DephasingParams::new(f)?;
            return Ok(match protocol {
                Protocol::OneClick => ParityImpl::DephasedOneClick(d),
                Protocol::TwoClick => ParityImpl::DephasedTwoClick(d),
            });
        }
        let p0 = EmitterParams::new(self.beta, self.delta0)?;
        let p1 = EmitterParams::new(self.beta, self.delta1)?;
        Ok(match protocol {
            Protocol::OneClick => ParityImpl::OneClick { p0, p1 },
            Protocol::TwoClick => ParityImpl::TwoClick { p0, p1 },
        })
    }
}

#[derive(Args, Debug)]
struct PurifyCmd {
    #[command(flatten)]
    parity: ParityArgs,
    /// Fidelity of the input Werner pairs.
    #[arg(long, default_value_t = 0.7)]
    werner: f64,
    #[arg(long, default_value_t = 3)]
    rounds: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CzCmd {
    #[command(flatten)]
    parity: ParityArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ChainCmd {
    #[command(flatten)]
    parity: ParityArgs,
    #[arg(long, default_value_t = 2)]
    links: usize,
    #[arg(long, default_value_t = 0)]
    rounds: u32,
    /// Heralding probability per attempt, before the input beamsplitter.
    #[arg(long, default_value_t = 0.5)]
    p_gen: f64,
    /// Fidelity of the raw Werner pairs.
    #[arg(long, default_value_t = 0.95)]
    werner: f64,
    #[arg(long, default_value_t = 1.0)]
    attempt_time: f64,
    /// Do not halve p_gen for the 50:50 input beamsplitter.
    #[arg(long)]
    no_bs1_halving: bool,
    /// White-noise weight added to the raw pair for the input beamsplitter.
    #[arg(long, default_value_t = 0.0)]
    bs1_mixing: f64,
    #[arg(long, default_value_t = 1000)]
    shots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

/// Argument values the parser accepts but the command cannot use.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

enum Cell {
    Real(f64),
    Int(u64),
}

struct Table {
    meta: Vec<String>,
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Table {
            meta: Vec::new(),
            header,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, argv: &[String], effective: &[String]) -> String {
        let mut s = format!("# qnet {}\n# argv: {}\n", env!("CARGO_PKG_VERSION"), argv.join(" "));
        if effective != argv {
            s += &format!("# effective argv: {}\n", effective.join(" "));
        }
        for m in &self.meta {
            s += &format!("# {m}\n");
        }
        s += &self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Real(x) => format!("{x:.16e}"),
                    Cell::Int(n) => n.to_string(),
                })
                .collect();
            s += &cells.join(",");
            s.push('\n');
        }
        s
    }
}

fn grid(from: f64, to: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(usage(format!("--points must be at least 2, got {points}")));
    }
    if !(from < to) {
        return Err(usage(format!("--from ({from}) must be below --to ({to})")));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i == points - 1 {
                return to;
            }
            let u = i as f64 / last;
            match spacing {
                Spacing::Linear => from + (to - from) * u,
                Spacing::Log => (from.ln() + (to.ln() - from.ln()) * u).exp(),
            }
        })
        .collect())
}

fn sweep_beta(cmd: &SweepBeta) -> Result<Table> {
    let betas = grid(cmd.from, cmd.to, cmd.points, Spacing::Linear)?;
    for &b in &betas {
        EmitterParams::new(b, 0.0)?;
    }
    let mut t = Table::new(vec!["beta", "P1", "P2", "infid1", "infid2"]);
    let rows: Vec<_> = betas
        .par_iter()
        .map(|&b| {
            vec![
                Cell::Real(b),
                Cell::Real(success_prob_closed_form(Protocol::OneClick, b)),
                Cell::Real(success_prob_closed_form(Protocol::TwoClick, b)),
                Cell::Real(cj_infidelity_resonant(Protocol::OneClick, b)),
                Cell::Real(cj_infidelity_resonant(Protocol::TwoClick, b)),
            ]
        })
        .collect();
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn sweep_detuning(cmd: &SweepDetuning) -> Result<Table> {
    let deltas = grid(cmd.from, cmd.to, cmd.points, Spacing::Linear)?;
    let rows: Vec<Vec<Cell>> = deltas
        .par_iter()
        .map(|&d| -> Result<Vec<Cell>> {
            let t0 = transmission(&EmitterParams::new(cmd.beta, -d)?);
            let t1 = transmission(&EmitterParams::new(cmd.beta, d)?);
            Ok(vec![
                Cell::Real(d),
                Cell::Real(cj_infidelity_closed_form(Protocol::OneClick, t0, t1)),
                Cell::Real(cj_infidelity_closed_form(Protocol::TwoClick, t0, t1)),
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(vec!["delta_over_gamma", "infid1", "infid2"]);
    t.meta
        .push(format!("beta0 = beta1 = {}, Delta = -Delta0 = Delta1", cmd.beta));
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn detuning_grid(cmd: &DetuningGrid) -> Result<Table> {
    let axis = grid(cmd.from, cmd.to, cmd.points, Spacing::Linear)?;
    let pairs: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
    let rows: Vec<Vec<Cell>> = pairs
        .par_iter()
        .map(|&(d0, d1)| -> Result<Vec<Cell>> {
            let t0 = transmission(&EmitterParams::new(cmd.beta, d0)?);
            let t1 = transmission(&EmitterParams::new(cmd.beta, d1)?);
            Ok(vec![
                Cell::Real(d0),
                Cell::Real(d1),
                Cell::Real(cj_fidelity_closed_form(Protocol::TwoClick, t0, t1)),
                Cell::Real(cj_infidelity_closed_form(Protocol::TwoClick, t0, t1)),
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(vec!["delta0_over_gamma", "delta1_over_gamma", "fidelity2", "infid2"]);
    t.meta.push(format!("beta0 = beta1 = {}", cmd.beta));
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn pulse(cmd: &PulseCmd) -> Result<Table> {
    let sigmas = match cmd.sigma {
        Some(s) => vec![s],
        None => {
            if cmd.spacing == Spacing::Log && cmd.from <= 0.0 {
                return Err(usage("log spacing needs --from > 0"));
            }
            grid(cmd.from, cmd.to, cmd.points, cmd.spacing)?
        }
    };
    let g0 = cmd.gamma_r[0];
    let g1 = *cmd.gamma_r.get(1).unwrap_or(&g0);
    let p0 = EmitterParams::new(cmd.beta, cmd.delta0)?.with_gamma_r(g0)?;
    let p1 = EmitterParams::new(cmd.beta, cmd.delta1)?.with_gamma_r(g1)?;
    let quad = QuadSpec {
        n_points: cmd.quad_panels,
        cutoff: cmd.quad_cutoff,
        tol: cmd.quad_tol,
    };
    let protocols = cmd.protocol.protocols();
    let header = match cmd.protocol {
        ProtocolArg::Both => vec![
            "sigma_over_gamma",
            "infid1_quadrature",
            "infid1_asymptote",
            "infid2_quadrature",
            "infid2_asymptote",
        ],
        _ => vec!["sigma_over_gamma", "infid_quadrature", "infid_asymptote"],
    };
    let rows: Vec<Vec<Cell>> = sigmas
        .par_iter()
        .map(|&s| -> Result<Vec<Cell>> {
            let spec = PulseSpec::new(s * g0)?.with_quad(quad)?;
            let mut row = vec![Cell::Real(s)];
            for &protocol in &protocols {
                let report = pulse_report(protocol, &p0, &p1, &spec)?;
                row.push(Cell::Real(report.infidelity));
                row.push(Cell::Real(cj_infidelity_asymptote(protocol, s * g0, g0, g1)));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(header);
    t.meta.push(format!(
        "beta = {}, Delta0 = {}, Delta1 = {}, Gamma0 = {g0}, Gamma1 = {g1}",
        cmd.beta, cmd.delta0, cmd.delta1
    ));
    t.meta.push(format!(
        "quadrature: {} panels, cutoff {} sigma, tol {:e}",
        quad.n_points, quad.cutoff, quad.tol
    ));
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn dephasing(cmd: &DephasingCmd) -> Result<Table> {
    let fs = grid(cmd.from, cmd.to, cmd.points, Spacing::Linear)?;
    let rows: Vec<Vec<Cell>> = fs
        .par_iter()
        .map(|&f| -> Result<Vec<Cell>> {
            let d = DephasingParams::new(f)?;
            Ok(vec![
                Cell::Real(f),
                Cell::Real(cj_infidelity_dephased(Protocol::OneClick, &d)),
                Cell::Real(cj_infidelity_dephased(Protocol::TwoClick, &d)),
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(vec!["inc_fraction", "infid1", "infid2"]);
    rows.into_iter().for_each(|r| t.push(r));
    Ok(t)
}

fn parity_meta(parity: &ParityImpl) -> String {
    format!("parity: {parity:?}")
}

fn purify(cmd: &PurifyCmd) -> Result<Table> {
    let parity = cmd.parity.parity()?;
    let mut pair = PairState::werner(cmd.werner)?;
    let mut t = Table::new(vec![
        "round",
        "fidelity",
        "success_prob",
        "w_phi_plus",
        "w_phi_minus",
        "w_psi_plus",
        "w_psi_minus",
    ]);
    t.meta.push(parity_meta(&parity));
    t.meta.push(format!("input: Werner pairs with fidelity {}", cmd.werner));
    let row = |round: u32, pair: &PairState, p: f64| {
        let w = pair.bell_weights();
        vec![
            Cell::Int(round as u64),
            Cell::Real(pair.fidelity()),
            Cell::Real(p),
            Cell::Real(w[0]),
            Cell::Real(w[1]),
            Cell::Real(w[2]),
            Cell::Real(w[3]),
        ]
    };
    t.push(row(0, &pair, 1.0));
    for r in 1..=cmd.rounds {
        let out = purify_pairs(&pair, &pair, &parity)?;
        pair = out.pair;
        t.push(row(r, &pair, out.success_prob));
    }
    Ok(t)
}

fn cz(cmd: &CzCmd) -> Result<Table> {
    let parity = cmd.parity.parity()?;
    let report = teleported_cz_choi(&parity)?;
    let keys = [
        (ParityKind::Even, ParityKind::Even),
        (ParityKind::Even, ParityKind::Odd),
        (ParityKind::Odd, ParityKind::Even),
        (ParityKind::Odd, ParityKind::Odd),
    ];
    let mut t = Table::new(vec![
        "parity_fidelity",
        "cz_fidelity",
        "success_prob",
        "fail_prob",
        "p_even_even",
        "p_even_odd",
        "p_odd_even",
        "p_odd_odd",
        "f_even_even",
        "f_even_odd",
        "f_odd_even",
        "f_odd_odd",
    ]);
    t.meta.push(parity_meta(&parity));
    let mut row = vec![
        Cell::Real(parity.cj_fidelity()),
        Cell::Real(report.overall_fidelity),
        Cell::Real(report.success_prob),
        Cell::Real(report.fail_prob),
    ];
    row.extend(keys.iter().map(|k| Cell::Real(report.branch_probs[k])));
    row.extend(keys.iter().map(|k| Cell::Real(report.branch_fidelities[k])));
    t.push(row);
    Ok(t)
}

const SHOT_CHUNK: u64 = 256;

fn chain(cmd: &ChainCmd) -> Result<Table> {
    let parity = cmd.parity.parity()?;
    let link = LinkModel::new(cmd.p_gen, PairState::werner(cmd.werner)?, cmd.attempt_time)?
        .with_bs1(!cmd.no_bs1_halving, cmd.bs1_mixing)?;
    let cfg = ChainConfig {
        n_links: cmd.links,
        link,
        parity,
        purify_rounds: cmd.rounds,
        rng_seed: cmd.seed,
    }
    .validated()?;
    if cmd.shots == 0 {
        return Err(usage("--shots must be at least 1"));
    }
    let chunks: Vec<std::ops::Range<u64>> = (0..cmd.shots.div_ceil(SHOT_CHUNK))
        .map(|c| c * SHOT_CHUNK..((c + 1) * SHOT_CHUNK).min(cmd.shots))
        .collect();
    let runs: Vec<netsim::RunStats> = chunks
        .into_par_iter()
        .map(|r| netsim::run_shot_range(&cfg, r))
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let summary = netsim::summarize(&runs);
    let exact = netsim::exact_chain_fidelity(&cfg)?;
    let mut t = Table::new(vec!["shot", "fidelity", "attempts", "elapsed"]);
    t.meta.push(format!("rng: {RNG_ALGORITHM}, seed = {}", cmd.seed));
    t.meta.push(parity_meta(&parity));
    t.meta.push(format!(
        "mean fidelity = {:.16e}, standard error = {:.16e}, exact = {exact:.16e}",
        summary.mean_fidelity, summary.std_error
    ));
    t.meta.push(format!(
        "mean attempts = {:.16e}, mean elapsed = {:.16e}",
        summary.mean_attempts, summary.mean_elapsed
    ));
    for (shot, r) in runs.iter().enumerate() {
        t.push(vec![
            Cell::Int(shot as u64),
            Cell::Real(r.end_to_end_fidelity),
            Cell::Int(r.total_attempts),
            Cell::Real(r.elapsed_time),
        ]);
    }
    Ok(t)
}

/// Turn `key = value` lines into flags placed right after the subcommand,
/// so anything given on the command line later overrides them.
fn config_args(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("reading config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected `key = value`", path.display(), n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(usage("config files cannot include other config files"));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

fn find_config(argv: &[String]) -> Option<PathBuf> {
    let mut found = None;
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            found = Some(PathBuf::from(p));
        }
    }
    found
}

fn expand_config(argv: &[String]) -> Result<Vec<String>> {
    let Some(path) = find_config(argv) else {
        return Ok(argv.to_vec());
    };
    let injected = config_args(&path)?;
    let mut out = argv[..2.min(argv.len())].to_vec();
    out.extend(injected);
    out.extend(argv.iter().skip(2).cloned());
    Ok(out)
}

fn execute(command: &Command) -> Result<(Table, Option<&Path>)> {
    Ok(match command {
        Command::SweepBeta(c) => (sweep_beta(c)?, c.common.out.as_deref()),
        Command::SweepDetuning(c) => (sweep_detuning(c)?, c.common.out.as_deref()),
        Command::DetuningGrid(c) => (detuning_grid(c)?, c.common.out.as_deref()),
        Command::Pulse(c) => (pulse(c)?, c.common.out.as_deref()),
        Command::Dephasing(c) => (dephasing(c)?, c.common.out.as_deref()),
        Command::Purify(c) => (purify(c)?, c.common.out.as_deref()),
        Command::Cz(c) => (cz(c)?, c.common.out.as_deref()),
        Command::Chain(c) => (chain(c)?, c.common.out.as_deref()),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<chiral_qnet::Error>() {
        Some(chiral_qnet::Error::NonConvergence(_)) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn run(argv: Vec<String>) -> Result<()> {
    let effective = expand_config(&argv)?;
    let cli = match Cli::try_parse_from(&effective) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            e.print()?;
            if code == 0 {
                return Ok(());
            }
            bail!(UsageError(String::new()));
        }
    };
    let (table, out) = execute(&cli.command)?;
    let text = table.render(&argv, &effective);
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let msg = e.to_string();
            if !msg.is_empty() {
                eprintln!("error: {e:#}");
                if code == 2 {
                    eprintln!("run `qnet <command> --help` for usage");
                }
            }
            ExitCode::from(code)
        }
    }
}
