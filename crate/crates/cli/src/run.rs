//! Executes one request of a scenario and collects its artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nuclear_waveguide::fourier::{OmegaGrid, TimeSeries};
use nuclear_waveguide::materials::{bundled, index_at, MaterialError, RefractiveIndex};
use nuclear_waveguide::modes::{InputAperture, Layer, LayerStack, ModeError, ModeSet, ModeSolverOptions, TwoModeParams};
use nuclear_waveguide::nuclear::{attenuation_zeta, wavenumber_from_energy_ev, ResponseModel};
use nuclear_waveguide::output::{fmt17, CsvTable};
use nuclear_waveguide::propagate::{fft_time_response, propagate_frequency, EffectiveSystem, PropagateError, FFT_TAIL_ORDER};
use nuclear_waveguide::strips::{
    bessel_limit_check, constructive_positions, destructive_positions, geometric_orders, orders_time_response,
    parse_layout, transfer_transmission, StripArray, StripError,
};
use nuclear_waveguide::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scenario::{
    linspace, Grid, LayoutKind, MaterialRef, ModeSelection, PositionSource, Scenario, ScenarioError, StripsRequest,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("materials: {0}")]
    Materials(#[from] MaterialError),
    #[error("modes: {0}")]
    Modes(#[from] ModeError),
    #[error("propagate: {0}")]
    Propagate(#[from] PropagateError),
    #[error("strips: {0}")]
    Strips(#[from] StripError),
    #[error("{0}")]
    Request(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Modes,
    Bulk,
    Strips,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Modes => "modes",
            Command::Bulk => "bulk",
            Command::Strips => "strips",
            Command::Sweep => "sweep",
        }
    }

    /// Tolerance keys that influence this command's results.
    fn tolerance_keys(self) -> &'static [&'static str] {
        match self {
            Command::Modes | Command::Strips => &["mode_root"],
            Command::Bulk => &["mode_root", "fft_half_span", "fft_spacing"],
            Command::Sweep => &["mode_root", "agreement"],
        }
    }
}

/// Numerical knobs, overridable from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    values: BTreeMap<&'static str, f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        let values = BTreeMap::from([
            // dispersion-determinant residual accepted as a root
            ("mode_root", 1e-10),
            // FFT grid half span and spacing, in units of γ
            ("fft_half_span", 200.0),
            ("fft_spacing", 0.02),
            // pointwise relative error defining the Bessel agreement window
            ("agreement", 1e-2),
        ]);
        Self { values }
    }
}

impl Tolerances {
    pub fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    /// Applies a `key=value` override.
    pub fn set_from(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| RunError::Request(format!("tolerance override `{assignment}` is not key=value")))?;
        let slot = self.values.get_mut(k.trim()).ok_or_else(|| {
            let known: Vec<&str> = Tolerances::default().values.keys().copied().collect();
            RunError::Request(format!("unknown tolerance `{}` (known: {})", k.trim(), known.join(", ")))
        })?;
        let v: f64 = v.trim().parse().map_err(|_| RunError::Request(format!("tolerance `{assignment}` is not numeric")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(RunError::Request(format!("tolerance `{assignment}` must be positive")));
        }
        *slot = v;
        Ok(())
    }
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub manifest: Value,
}

impl RunOutput {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }

    /// Writes every artifact plus `manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for a in &self.artifacts {
            fs::write(dir.join(&a.name), &a.contents)?;
        }
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Whitespace-separated columns under a `#` header, one block per call to
/// [`PlotData::row`] sequence; [`PlotData::gap`] inserts the blank line that
/// separates surface scans.
struct PlotData {
    text: String,
}

impl PlotData {
    fn new(columns: &[&str]) -> Self {
        Self { text: format!("# {}\n", columns.join(" ")) }
    }

    fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| fmt17(v)).collect();
        let _ = writeln!(self.text, "{}", cells.join(" "));
    }

    fn gap(&mut self) {
        self.text.push('\n');
    }
}

struct Context<'a> {
    scenario: &'a Scenario,
    tolerances: &'a Tolerances,
    base_dir: &'a Path,
    artifacts: Vec<Artifact>,
    summary: serde_json::Map<String, Value>,
}

impl Context<'_> {
    fn emit(&mut self, name: impl Into<String>, contents: String) {
        self.artifacts.push(Artifact { name: name.into(), contents });
    }

    fn gamma(&self) -> f64 {
        self.scenario.species.gamma
    }
}

fn material_index(m: &MaterialRef, energy_ev: f64) -> Result<RefractiveIndex<f64>> {
    Ok(match m {
        MaterialRef::Bundled(name) => index_at(&bundled(name)?, energy_ev)?,
        MaterialRef::Custom { index, .. } => *index,
    })
}

pub fn build_stack(scenario: &Scenario) -> Result<LayerStack<f64>> {
    let s = &scenario.stack;
    let layers = s
        .layers
        .iter()
        .map(|l| Ok(Layer { thickness: l.thickness, index: material_index(&l.material, s.energy_ev)? }))
        .collect::<Result<Vec<_>>>()?;
    let stack = LayerStack::new(
        material_index(&s.top, s.energy_ev)?,
        layers,
        material_index(&s.bottom, s.energy_ev)?,
        wavenumber_from_energy_ev(s.energy_ev),
    )?;
    Ok(stack.with_resonant_layer(s.resonant)?)
}

fn solve_modes(ctx: &Context) -> Result<ModeSet<f64>> {
    let stack = build_stack(ctx.scenario)?;
    let opts = ModeSolverOptions { tol_root: ctx.tolerances.get("mode_root"), ..Default::default() };
    let set = ModeSet::solve_with(&stack, &opts)?;
    if set.is_empty() {
        return Err(RunError::Request("modes: the stack supports no guided mode".into()));
    }
    Ok(set)
}

fn build_system(ctx: &Context, set: &ModeSet<f64>) -> Result<EffectiveSystem<f64>> {
    let species = &ctx.scenario.species;
    let response = ResponseModel::isotropic(species.clone());
    let sys = match (ctx.scenario.selection, set.dominant_pair()) {
        (ModeSelection::Dominant, Some((a, b))) => {
            EffectiveSystem::from_mode_subset(set, &[a, b], response, InputAperture::Core)?
        }
        _ => EffectiveSystem::from_mode_set(set, response, InputAperture::Core)?,
    };
    Ok(sys.with_zeta(attenuation_zeta(species))?)
}

fn two_mode(set: &ModeSet<f64>) -> Result<Option<TwoModeParams<f64>>> {
    set.two_mode_parameters().transpose().map_err(RunError::from)
}

fn modes_outputs(ctx: &mut Context, set: &ModeSet<f64>) -> Result<()> {
    let overlaps = set.input_overlaps(InputAperture::Core);
    let mut t = CsvTable::new(&[
        "index", "re_q_rel_per_m", "im_q_rel_per_m", "re_xi", "im_xi", "abs_xi", "re_b_in_sqrt_m", "im_b_in_sqrt_m",
    ]);
    for (k, ((m, xi), b)) in set.modes().iter().zip(set.couplings()).zip(&overlaps).enumerate() {
        let q = m.q_rel();
        t.push_cells(&[
            (k + 1).to_string(),
            fmt17(q.re),
            fmt17(q.im),
            fmt17(xi.re),
            fmt17(xi.im),
            fmt17(xi.norm()),
            fmt17(b.re),
            fmt17(b.im),
        ]);
    }
    ctx.emit("modes.csv", t.to_text());

    let stack = build_stack(ctx.scenario)?;
    let margin = ctx.scenario.modes.margin;
    let z = linspace(-margin, stack.total_thickness() + margin, ctx.scenario.modes.profile_points);
    let mut header = vec!["z_nm".to_string()];
    for k in 1..=set.len() {
        header.push(format!("re_u{k}"));
        header.push(format!("im_u{k}"));
    }
    let cols: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut plot = PlotData::new(&cols);
    for &zz in &z {
        let mut row = vec![zz * 1e9];
        for m in set.modes() {
            let u = m.value(zz);
            row.extend([u.re, u.im]);
        }
        plot.row(&row);
    }
    ctx.emit("mode_profiles.dat", plot.text);

    ctx.summary.insert("guided_modes".into(), json!(set.len()));
    if let Some(p) = two_mode(set)? {
        let mut t = CsvTable::new(&["parameter", "value"]);
        for (name, v) in [
            ("q_bar_per_m", p.q_bar),
            ("delta_q_per_m", p.delta_q),
            ("kappa_bar_per_m", p.kappa_bar),
            ("delta_kappa_per_m", p.delta_kappa),
            ("phi_bar_rad", p.phi_bar),
            ("delta_phi_rad", p.delta_phi),
            ("abs_xi_1", p.xi_mags[0]),
            ("abs_xi_2", p.xi_mags[1]),
            ("beat_length_m", p.beat_length()),
            ("q_beat", p.q_beat),
            ("q_atten", p.q_atten),
            ("q_mean", p.q_mean),
        ] {
            t.push_cells(&[name.to_string(), fmt17(v)]);
        }
        ctx.emit("two_mode.csv", t.to_text());
    }
    Ok(())
}

/// Linear interpolation of a uniformly sampled series; zero outside.
fn sample(ts: &TimeSeries<f64>, t: f64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    if ts.t.len() < 2 || t < ts.t[0] {
        return zero;
    }
    let dt = ts.t[1] - ts.t[0];
    let pos = (t - ts.t[0]) / dt;
    let k = pos.floor() as usize;
    if k + 1 >= ts.t.len() {
        return zero;
    }
    let w = pos - k as f64;
    ts.values[k] * (1.0 - w) + ts.values[k + 1] * w
}

fn run_bulk(ctx: &mut Context, set: &ModeSet<f64>) -> Result<()> {
    let req = ctx.scenario.bulk.clone().ok_or_else(|| RunError::Request("bulk: scenario has no [bulk] section".into()))?;
    let sys = build_system(ctx, set)?;
    let g = ctx.gamma();
    let grid = OmegaGrid { half_span: ctx.tolerances.get("fft_half_span") * g, spacing: ctx.tolerances.get("fft_spacing") * g };
    let xs = linspace(req.x.start, req.x.stop, req.x.count);
    let ts = linspace(req.t.start.seconds(g), req.t.stop.seconds(g), req.t.count);
    let t_max = ts[ts.len() - 1];
    let rows: Vec<Vec<Complex64>> = xs
        .par_iter()
        .map(|&x| {
            if x == 0.0 {
                return Ok(vec![Complex64::new(0.0, 0.0); ts.len()]);
            }
            let series = fft_time_response(&sys, x, &grid)?.truncated(t_max + 2.0 * grid.time_step());
            Ok(ts.iter().map(|&t| sample(&series, t)).collect())
        })
        .collect::<Result<_>>()?;
    let mut csv = CsvTable::new(&["x_m", "t_s", "re", "im", "abs2"]);
    let mut plot = PlotData::new(&["x_um", "t_gamma", "abs2"]);
    for (x, row) in xs.iter().zip(&rows) {
        for (t, v) in ts.iter().zip(row) {
            csv.push(&[*x, *t, v.re, v.im, v.norm_sqr()]);
            plot.row(&[x * 1e6, t * g, v.norm_sqr()]);
        }
        plot.gap();
    }
    ctx.emit("field2d.csv", csv.to_text());
    ctx.emit("field2d.dat", plot.text);

    let x_end = xs[xs.len() - 1];
    let ws = linspace(req.omega.start.per_second(g), req.omega.stop.per_second(g), req.omega.count);
    let b0 = sys.input_total();
    let spectrum: Vec<Complex64> = ws
        .par_iter()
        .map(|&w| Ok(propagate_frequency(&sys, x_end, w)?.iter().sum::<Complex64>() / b0))
        .collect::<Result<_>>()?;
    let mut csv = CsvTable::new(&["omega_rad_per_s", "re_t", "im_t", "abs2_t"]);
    let mut plot = PlotData::new(&["omega_gamma", "abs2_t"]);
    for (w, v) in ws.iter().zip(&spectrum) {
        csv.push(&[*w, v.re, v.im, v.norm_sqr()]);
        plot.row(&[w / g, v.norm_sqr()]);
    }
    ctx.emit("spectrum.csv", csv.to_text());
    ctx.emit("spectrum.dat", plot.text);
    ctx.summary.insert("spectrum_distance_m".into(), json!(x_end));
    ctx.summary.insert("fft_tail_order".into(), json!(FFT_TAIL_ORDER));
    ctx.summary.insert("optical_depth_per_m".into(), json!((sys.trace_lambda() * sys.zeta()).norm()));
    Ok(())
}

fn strip_positions(ctx: &Context, req: &StripsRequest, kind: LayoutKind, params: Option<&TwoModeParams<f64>>) -> Result<Vec<f64>> {
    let need = || params.ok_or_else(|| RunError::Request("strips: generated layouts need two guided modes".into()));
    let raw = match kind {
        LayoutKind::Constructive => constructive_positions(req.count, need()?),
        LayoutKind::Destructive => destructive_positions(req.count, need()?),
        LayoutKind::Custom => match req.positions.as_ref().expect("validated") {
            PositionSource::Inline(p) => p.clone(),
            PositionSource::File(path) => {
                let path = ctx.base_dir.join(path);
                parse_layout(&fs::read_to_string(&path).map_err(|e| RunError::Request(format!("strips: {}: {e}", path.display())))?)?
            }
        },
    };
    Ok(raw.into_iter().map(|x| x + req.offset).collect())
}

/// `(max − min)/(max + min)` of a sequence.
fn visibility(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    if hi + lo > 0.0 {
        (hi - lo) / (hi + lo)
    } else {
        0.0
    }
}

fn run_strips(ctx: &mut Context, set: &ModeSet<f64>) -> Result<()> {
    let req = ctx.scenario.strips.clone().ok_or_else(|| RunError::Request("strips: scenario has no [strips] section".into()))?;
    let sys = build_system(ctx, set)?;
    let params = two_mode(set)?;
    let g = ctx.gamma();
    let mut arrays = Vec::new();
    for &kind in &req.layouts {
        let pos = strip_positions(ctx, &req, kind, params.as_ref())?;
        arrays.push((kind, StripArray::new(pos, req.width, sys.clone())?));
    }
    let last = arrays.iter().map(|(_, a)| a.positions()[a.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
    let first = arrays.iter().map(|(_, a)| a.positions()[0]).fold(f64::INFINITY, f64::min);
    let observe = req.observe.unwrap_or(last + req.width);
    let profile = match req.x {
        Some(grid) => grid,
        None => {
            let tail = params.map(|p| 2.0 * p.beat_length()).unwrap_or(50e-6);
            Grid { start: first, stop: last + tail, count: 2001 }
        }
    };
    let xs = linspace(profile.start, profile.stop, profile.count);
    let ts = linspace(req.t.start.seconds(g), req.t.stop.seconds(g), req.t.count);
    let ws = linspace(req.omega.start.per_second(g), req.omega.stop.per_second(g), req.omega.count);
    let b0 = sys.input_total();

    let mut profiles = Vec::new();
    let mut times = Vec::new();
    let mut spectra = Vec::new();
    let mut summary = serde_json::Map::new();
    for (kind, array) in &arrays {
        let name = kind.label();
        ctx.emit(format!("layout_{name}.csv"), array.layout_csv().to_text());
        let scattered: Vec<Complex64> = xs
            .par_iter()
            .map(|&x| Ok(transfer_transmission(array, x, 0.0)? - sys.free_field(x) / b0))
            .collect::<Result<_>>()?;
        let v = geometric_orders(array, observe, array.len())?;
        let r = array.response();
        let time: Vec<Complex64> = ts.iter().map(|&t| orders_time_response(&v, r.nu0(), r.gamma, t)).collect();
        let spectrum: Vec<Complex64> = ws
            .par_iter()
            .map(|&w| Ok(transfer_transmission(array, observe, w)?))
            .collect::<Result<_>>()?;

        let mut csv = CsvTable::new(&["x_m", "re_t_sc", "im_t_sc", "abs2_t_sc"]);
        for (x, s) in xs.iter().zip(&scattered) {
            csv.push(&[*x, s.re, s.im, s.norm_sqr()]);
        }
        ctx.emit(format!("profile_{name}.csv"), csv.to_text());
        let mut csv = CsvTable::new(&["t_s", "re", "im", "abs2"]);
        for (t, s) in ts.iter().zip(&time) {
            csv.push(&[*t, s.re, s.im, s.norm_sqr()]);
        }
        ctx.emit(format!("time_{name}.csv"), csv.to_text());
        let mut csv = CsvTable::new(&["omega_rad_per_s", "re_t", "im_t", "abs2_t"]);
        for (w, s) in ws.iter().zip(&spectrum) {
            csv.push(&[*w, s.re, s.im, s.norm_sqr()]);
        }
        ctx.emit(format!("spectrum_{name}.csv"), csv.to_text());

        let intensity: Vec<f64> = scattered.iter().map(|s| s.norm_sqr()).collect();
        let end = array.positions()[array.len() - 1] + array.width();
        let downstream: Vec<f64> = xs.iter().zip(&intensity).filter(|(x, _)| **x > end).map(|(_, i)| *i).collect();
        summary.insert(
            name.into(),
            json!({
                "strips": array.len(),
                "tau_per_strip": array.tau(),
                "nu0_over_gamma": [r.nu0().re / g, r.nu0().im / g],
                "peak_on_resonance_abs2": intensity.iter().copied().fold(0.0, f64::max),
                "downstream_visibility": visibility(&downstream),
            }),
        );
        profiles.push(intensity);
        times.push(time);
        spectra.push(spectrum);
    }

    let labels: Vec<String> = arrays.iter().map(|(k, _)| format!("abs2_{}", k.label())).collect();
    let with_axis = |axis: &str| {
        let mut cols = vec![axis];
        cols.extend(labels.iter().map(String::as_str));
        PlotData::new(&cols)
    };
    let mut plot = with_axis("x_um");
    for (k, x) in xs.iter().enumerate() {
        let mut row = vec![x * 1e6];
        row.extend(profiles.iter().map(|p| p[k]));
        plot.row(&row);
    }
    ctx.emit("strips_profile.dat", plot.text);
    let mut plot = with_axis("t_gamma");
    for (k, t) in ts.iter().enumerate() {
        let mut row = vec![t * g];
        row.extend(times.iter().map(|s| s[k].norm_sqr()));
        plot.row(&row);
    }
    ctx.emit("strips_time.dat", plot.text);
    let mut plot = with_axis("omega_gamma");
    for (k, w) in ws.iter().enumerate() {
        let mut row = vec![w / g];
        row.extend(spectra.iter().map(|s| s[k].norm_sqr()));
        plot.row(&row);
    }
    ctx.emit("strips_spectrum.dat", plot.text);
    ctx.summary.insert("observe_m".into(), json!(observe));
    ctx.summary.insert("layouts".into(), Value::Object(summary));
    Ok(())
}

fn first_minimum(t: &[f64], v: &[f64]) -> Option<f64> {
    (1..v.len().saturating_sub(1)).find(|&k| v[k] < v[k - 1] && v[k] <= v[k + 1]).map(|k| t[k])
}

fn run_sweep(ctx: &mut Context, set: &ModeSet<f64>) -> Result<()> {
    let req = ctx.scenario.sweep.clone().ok_or_else(|| RunError::Request("sweep: scenario has no [sweep] section".into()))?;
    let sys = build_system(ctx, set)?;
    let g = ctx.gamma();
    // ν0 is linear in strip width, so one strip of the full width fixes τ_eff
    let whole = StripArray::new(vec![0.0], req.total_width, sys)?;
    let nu0 = whole.response().nu0();
    let tau_eff = 4.0 * nu0.norm() / g;
    let ts = linspace(req.t.start.seconds(g), req.t.stop.seconds(g), req.t.count);
    let tol = ctx.tolerances.get("agreement");
    let checks = req
        .counts
        .par_iter()
        .map(|&n| Ok(bessel_limit_check(n, tau_eff, g, &ts)?))
        .collect::<Result<Vec<_>>>()?;
    let nan = f64::NAN;
    let mut csv = CsvTable::new(&[
        "strips",
        "im_nu0_per_strip_gamma",
        "agreement_window_gamma",
        "deviation",
        "first_min_laguerre_gamma",
        "first_min_bessel_gamma",
    ]);
    let mut header = vec!["t_gamma".to_string()];
    for (&n, c) in req.counts.iter().zip(&checks) {
        let lag: Vec<f64> = c.laguerre.iter().map(|v| v.norm_sqr()).collect();
        let bes: Vec<f64> = c.bessel.iter().map(|v| v.norm_sqr()).collect();
        csv.push(&[
            n as f64,
            nu0.norm() / (n as f64 * g),
            c.agreement_window(tol) * g,
            c.deviation_until(ts[ts.len() - 1]),
            first_minimum(&ts, &lag).map_or(nan, |t| t * g),
            first_minimum(&ts, &bes).map_or(nan, |t| t * g),
        ]);
        header.push(format!("abs2_laguerre_{n}"));
        header.push(format!("abs2_bessel_{n}"));
    }
    ctx.emit("sweep.csv", csv.to_text());
    let cols: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut plot = PlotData::new(&cols);
    for (k, t) in ts.iter().enumerate() {
        let mut row = vec![t * g];
        for c in &checks {
            row.extend([c.laguerre[k].norm_sqr(), c.bessel[k].norm_sqr()]);
        }
        plot.row(&row);
    }
    ctx.emit("sweep_time.dat", plot.text);
    ctx.summary.insert("tau_eff".into(), json!(tau_eff));
    Ok(())
}

/// Runs `command` on a parsed scenario. `input` is the raw scenario text,
/// hashed into the manifest; `base_dir` resolves relative layout files.
pub fn run(scenario: &Scenario, command: Command, input: &str, base_dir: &Path, tolerances: &Tolerances) -> Result<RunOutput> {
    let mut ctx = Context { scenario, tolerances, base_dir, artifacts: Vec::new(), summary: serde_json::Map::new() };
    let set = solve_modes(&ctx)?;
    match command {
        Command::Modes => modes_outputs(&mut ctx, &set)?,
        Command::Bulk => run_bulk(&mut ctx, &set)?,
        Command::Strips => run_strips(&mut ctx, &set)?,
        Command::Sweep => run_sweep(&mut ctx, &set)?,
    }
    if let Some(p) = two_mode(&set)? {
        ctx.summary.insert("beat_length_m".into(), json!(p.beat_length()));
    }
    let used: serde_json::Map<String, Value> = command
        .tolerance_keys()
        .iter()
        .map(|k| (k.to_string(), json!(tolerances.get(k))))
        .collect();
    let manifest = json!({
        "tool": "nwg",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "input_sha256": hex::encode(Sha256::digest(input.as_bytes())),
        "tolerances": used,
        "outputs": ctx.artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "summary": ctx.summary,
    });
    Ok(RunOutput { artifacts: ctx.artifacts, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_overrides() {
        let mut t = Tolerances::default();
        t.set_from("fft_spacing = 0.05").unwrap();
        assert_eq!(t.get("fft_spacing"), 0.05);
        assert!(t.set_from("nope=1").unwrap_err().to_string().contains("unknown tolerance"));
        assert!(t.set_from("agreement=-1").is_err());
        assert!(t.set_from("agreement").is_err());
    }

    #[test]
    fn interpolation_inside_and_outside() {
        let ts = TimeSeries { t: vec![0.0, 1.0, 2.0], values: vec![Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(4.0, 2.0)] };
        assert_eq!(sample(&ts, 0.5), Complex64::new(1.0, 0.0));
        assert_eq!(sample(&ts, 1.5), Complex64::new(3.0, 1.0));
        assert_eq!(sample(&ts, 5.0), Complex64::new(0.0, 0.0));
        assert_eq!(sample(&ts, -1.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn visibility_of_flat_and_full_beats() {
        assert_eq!(visibility(&[1.0, 1.0]), 0.0);
        assert_eq!(visibility(&[0.0, 2.0, 1.0]), 1.0);
    }
}
