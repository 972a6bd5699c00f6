use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "rotor", version, about = "GKP-type codes on rotors: build codes, check them, sweep parameters")]
pub struct Cli {
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format. Sweeps default to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Seed for randomised checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Exit with status 1 if the command's acceptance check fails.
    #[arg(long, global = true)]
    pub check: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Numeric tables.
    #[command(subcommand)]
    Tables(TablesCmd),
    /// Representation theory of a code H ⊂ K.
    #[command(subcommand)]
    Code(CodeCmd),
    /// Planar-rotor codes on a discrete grid.
    #[command(subcommand)]
    Planar(PlanarCmd),
    /// Rigid-rotor (SO(3)) codes.
    #[command(subcommand)]
    Mol(MolCmd),
    /// Linear-rotor (S²) codes.
    #[command(subcommand)]
    Sphere(SphereCmd),
}

#[derive(Subcommand, Debug)]
pub enum TablesCmd {
    /// Wigner D-matrix D^ℓ(α,β,γ).
    Wigner(WignerArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct WignerArgs {
    #[arg(long)]
    pub ell: usize,
    /// ZYZ Euler angles `alpha,beta,gamma` in radians.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_triple)]
    pub rotation: [f64; 3],
}

#[derive(Subcommand, Debug)]
pub enum CodeCmd {
    /// SO(3) → K → H branching for ℓ ≤ lmax.
    Branch(GroupPair),
    /// Correctability verdicts for momentum kicks.
    Classify(GroupPair),
}

#[derive(Args, Debug, Serialize)]
pub struct GroupPair {
    #[arg(long = "K")]
    pub k: String,
    #[arg(long = "H")]
    pub h: String,
    #[arg(long, default_value_t = 6)]
    pub lmax: usize,
}

#[derive(Subcommand, Debug)]
pub enum PlanarCmd {
    /// One error-correction round on a random logical state.
    Demo(PlanarArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct PlanarArgs {
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Grid refinement: the grid has q·d·N points.
    #[arg(long, default_value_t = 8)]
    pub q: usize,
    /// Comma-separated `shift:<radians>` and `kick:<integer>`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_planar_error, default_value = "")]
    pub error: PlanarError,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct PlanarError {
    pub shift: f64,
    pub kick: i64,
}

#[derive(Subcommand, Debug)]
pub enum MolCmd {
    /// Work with the code H ⊂ K.
    Code(MolCodeArgs),
    /// Sweep Δ and tabulate a figure of merit.
    #[command(subcommand)]
    Sweep(SweepCmd),
    /// Find Δ with a given leakage probability for Z_N ⊂ Z_2N.
    Solve(SolveArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct MolCodeArgs {
    #[arg(long = "H")]
    pub h: String,
    #[arg(long = "K")]
    pub k: String,
    #[command(subcommand)]
    #[serde(skip)]
    pub action: MolCodeAction,
}

#[derive(Subcommand, Debug)]
pub enum MolCodeAction {
    /// Knill-Laflamme check over kicks with ℓ ≤ lmax and optional shifts.
    Kl(KlArgs),
    /// Stabilizer-like check operators (Z_N ⊂ Z_2N only).
    Checks,
}

#[derive(Args, Debug, Serialize)]
pub struct KlArgs {
    #[arg(long, default_value_t = 1)]
    pub lmax: usize,
    /// Number of random position shifts to include.
    #[arg(long, default_value_t = 0)]
    pub shifts: usize,
    /// Largest rotation angle of the random shifts.
    #[arg(long, default_value_t = 0.1)]
    pub max_angle: f64,
}

#[derive(Subcommand, Debug)]
pub enum SweepCmd {
    /// Leakage probability and average momentum of Z_N ⊂ Z_2N.
    Pleak(SweepArgs),
    /// Distortion ⟨0̃|D̂^ℓ_00|1̃⟩ of Z_N ⊂ Z_2N.
    Distortion(DistortionArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long = "N")]
    pub n: usize,
    /// `start:stop:step`, inclusive.
    #[arg(long, value_parser = parse_range)]
    pub delta: DeltaRange,
}

#[derive(Args, Debug, Serialize)]
pub struct DistortionArgs {
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
    #[arg(long, value_parser = parse_range)]
    pub delta: DeltaRange,
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long)]
    pub pleak: f64,
    #[arg(long, default_value_t = 0.08)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.6)]
    pub hi: f64,
}

#[derive(Subcommand, Debug)]
pub enum SphereCmd {
    /// Spherical-design strength of a named point set.
    Design(DesignArgs),
    /// Knill-Laflamme check for the equatorial Z_N code.
    Kl(SphereKlArgs),
    /// Check operators of an S² code.
    Checks(SphereChecksArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct DesignArgs {
    /// cube, tetrahedron, octahedron, icosahedron or equator:N.
    #[arg(long)]
    pub points: String,
    #[arg(long = "L")]
    pub l: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereErrors {
    Rotations,
    Kicks,
    Combined,
    All,
}

#[derive(Args, Debug, Serialize)]
pub struct SphereKlArgs {
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = SphereErrors::All)]
    pub errors: SphereErrors,
    /// Largest harmonic degree among the kicks.
    #[arg(long, default_value_t = 1)]
    pub lmax: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct SphereChecksArgs {
    /// An odd N for the equatorial code; omit for the tetrahedral code.
    #[arg(long = "N")]
    pub n: Option<usize>,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected three comma-separated angles".to_string())
}

fn parse_planar_error(s: &str) -> Result<PlanarError, String> {
    let mut e = PlanarError::default();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, val) = part.split_once(':').ok_or_else(|| format!("'{part}' is not key:value"))?;
        match key {
            "shift" => e.shift = val.parse().map_err(|err| format!("shift '{val}': {err}"))?,
            "kick" => e.kick = val.parse().map_err(|err| format!("kick '{val}': {err}"))?,
            _ => return Err(format!("unknown error kind '{key}'")),
        }
    }
    Ok(e)
}

#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
pub struct DeltaRange(pub Vec<f64>);

/// `start:stop:step` (inclusive) or a single value.
pub fn parse_range(s: &str) -> Result<DeltaRange, String> {
    values_of_range(s).map(DeltaRange)
}

fn values_of_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x] => Ok(vec![x]),
        [a, b, step] => {
            if step.is_nan() || step <= 0.0 || b < a {
                return Err("need start ≤ stop and step > 0".into());
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        _ => Err("expected start:stop:step".into()),
    }
}
