//! Scenario files: `[section]` headers followed by `key = value` lines.
//!
//! Physical quantities carry an explicit unit suffix (`15.8 nm`, `14.4 keV`,
//! `5 gamma`). Times and frequencies may be given in units of the natural
//! linewidth, which is only known once the species is fixed, so they stay
//! symbolic until [`TimeValue::seconds`] / [`FrequencyValue::per_second`].

use std::collections::BTreeMap;
use std::path::PathBuf;

use nuclear_waveguide::materials::RefractiveIndex;
use nuclear_waveguide::nuclear::wigner::HalfInt;
use nuclear_waveguide::nuclear::NuclearSpecies;
use thiserror::Error;

const HBAR_EV_S: f64 = 6.582_119_569e-16;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ScenarioError>;

fn bad(key: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Value { key: key.to_string(), message: message.into() }
}

/// Raw `section.key -> [(line, value)]` entries in file order.
#[derive(Debug, Default)]
struct Document {
    entries: BTreeMap<String, Vec<(usize, String)>>,
    sections: Vec<String>,
}

impl Document {
    fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ScenarioError::Syntax { line, message: "unterminated section header".into() })?;
                section = name.split_whitespace().collect::<Vec<_>>().join(" ");
                if doc.sections.contains(&section) {
                    return Err(ScenarioError::Syntax { line, message: format!("section [{section}] repeated") });
                }
                doc.sections.push(section.clone());
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| ScenarioError::Syntax { line, message: format!("expected `key = value`, got `{body}`") })?;
            if section.is_empty() {
                return Err(ScenarioError::Syntax { line, message: "key outside of any section".into() });
            }
            let key = format!("{section}.{}", k.trim());
            let slot = doc.entries.entry(key.clone()).or_default();
            if !slot.is_empty() && !key.ends_with(".layer") {
                return Err(ScenarioError::Syntax { line, message: format!("`{key}` given twice") });
            }
            slot.push((line, v.trim().to_string()));
        }
        Ok(doc)
    }

    fn has_section(&self, name: &str) -> bool {
        self.sections.iter().any(|s| s == name)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).and_then(|mut v| v.pop()).map(|(_, s)| s)
    }

    fn take_all(&mut self, key: &str) -> Vec<(usize, String)> {
        self.entries.remove(key).unwrap_or_default()
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| ScenarioError::Missing(key.to_string()))
    }
}

fn split_quantity<'a>(key: &str, text: &'a str) -> Result<(f64, &'a str)> {
    let mut it = text.split_whitespace();
    let num = it.next().ok_or_else(|| bad(key, "empty value"))?;
    let unit = it.next().unwrap_or("");
    if it.next().is_some() {
        return Err(bad(key, format!("expected `<number> <unit>`, got `{text}`")));
    }
    let v: f64 = num.parse().map_err(|_| bad(key, format!("`{num}` is not a number")))?;
    if !v.is_finite() {
        return Err(bad(key, "value is not finite"));
    }
    Ok((v, unit))
}

/// Length in metres.
pub fn parse_length(key: &str, text: &str) -> Result<f64> {
    let (v, unit) = split_quantity(key, text)?;
    // dividing keeps decimal inputs correctly rounded
    let per_metre = match unit {
        "nm" => 1e9,
        "um" | "μm" => 1e6,
        "mm" => 1e3,
        "m" => 1.0,
        "" => return Err(bad(key, "length needs a unit (nm, um, mm, m)")),
        u => return Err(bad(key, format!("`{u}` is not a length unit"))),
    };
    Ok(v / per_metre)
}

/// Energy in eV.
pub fn parse_energy(key: &str, text: &str) -> Result<f64> {
    let (v, unit) = split_quantity(key, text)?;
    let (mul, div) = match unit {
        "neV" => (1.0, 1e9),
        "eV" => (1.0, 1.0),
        "keV" => (1e3, 1.0),
        "" => return Err(bad(key, "energy needs a unit (neV, eV, keV)")),
        u => return Err(bad(key, format!("`{u}` is not an energy unit"))),
    };
    Ok(v * mul / div)
}

fn parse_density(key: &str, text: &str) -> Result<f64> {
    let (v, unit) = split_quantity(key, text)?;
    match unit {
        "m-3" => Ok(v),
        "cm-3" => Ok(v * 1e6),
        "" => Err(bad(key, "density needs a unit (m-3, cm-3)")),
        u => Err(bad(key, format!("`{u}` is not a density unit"))),
    }
}

fn parse_plain(key: &str, text: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| bad(key, format!("`{text}` is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, "value is not finite"))
    }
}

fn parse_count(key: &str, text: &str) -> Result<usize> {
    text.trim().parse().map_err(|_| bad(key, format!("`{text}` is not a non-negative integer")))
}

/// A time, either absolute or in multiples of `1/γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeValue {
    Seconds(f64),
    Lifetimes(f64),
}

impl TimeValue {
    pub fn seconds(self, gamma: f64) -> f64 {
        match self {
            TimeValue::Seconds(s) => s,
            TimeValue::Lifetimes(n) => n / gamma,
        }
    }

    fn parse(key: &str, text: &str) -> Result<Self> {
        let (v, unit) = split_quantity(key, text)?;
        Ok(match unit {
            "s" => TimeValue::Seconds(v),
            "us" | "μs" => TimeValue::Seconds(v / 1e6),
            "ns" => TimeValue::Seconds(v / 1e9),
            "gamma" => TimeValue::Lifetimes(v),
            "" => return Err(bad(key, "time needs a unit (ns, us, s, gamma)")),
            u => return Err(bad(key, format!("`{u}` is not a time unit"))),
        })
    }
}

/// A detuning, either in rad/s, as an energy, or in multiples of `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrequencyValue {
    PerSecond(f64),
    Linewidths(f64),
}

impl FrequencyValue {
    pub fn per_second(self, gamma: f64) -> f64 {
        match self {
            FrequencyValue::PerSecond(w) => w,
            FrequencyValue::Linewidths(n) => n * gamma,
        }
    }

    fn parse(key: &str, text: &str) -> Result<Self> {
        let (v, unit) = split_quantity(key, text)?;
        Ok(match unit {
            "rad/s" => FrequencyValue::PerSecond(v),
            "neV" => FrequencyValue::PerSecond(v / 1e9 / HBAR_EV_S),
            "gamma" => FrequencyValue::Linewidths(v),
            "" => return Err(bad(key, "detuning needs a unit (rad/s, neV, gamma)")),
            u => return Err(bad(key, format!("`{u}` is not a detuning unit"))),
        })
    }
}

/// `count` points from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<Q> {
    pub start: Q,
    pub stop: Q,
    pub count: usize,
}

/// Evenly spaced points; a single point sits at `start`.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let step = (stop - start) / (count - 1) as f64;
    (0..count).map(|k| start + step * k as f64).collect()
}

fn check_grid(prefix: &str, start: f64, stop: f64, count: usize) -> Result<()> {
    if count == 0 {
        return Err(bad(&format!("{prefix}_count"), "grid is empty"));
    }
    if count > 1 && !(stop > start) {
        return Err(bad(&format!("{prefix}_stop"), "grid must be strictly increasing"));
    }
    Ok(())
}

fn take_grid<Q: Copy>(
    doc: &mut Document,
    prefix: &str,
    parse: fn(&str, &str) -> Result<Q>,
    default: Option<Grid<Q>>,
) -> Result<Option<Grid<Q>>> {
    let keys = [format!("{prefix}_start"), format!("{prefix}_stop"), format!("{prefix}_count")];
    let given: Vec<Option<String>> = keys.iter().map(|k| doc.take(k)).collect();
    if given.iter().all(Option::is_none) {
        return Ok(default);
    }
    let mut values = Vec::new();
    for (k, v) in keys.iter().zip(&given) {
        values.push(v.clone().ok_or_else(|| ScenarioError::Missing(k.clone()))?);
    }
    Ok(Some(Grid {
        start: parse(&keys[0], &values[0])?,
        stop: parse(&keys[1], &values[1])?,
        count: parse_count(&keys[2], &values[2])?,
    }))
}

/// Which modes enter the propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    /// The two most strongly coupled modes.
    Dominant,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaterialRef {
    Bundled(String),
    Custom { name: String, index: RefractiveIndex<f64> },
}

impl MaterialRef {
    pub fn name(&self) -> &str {
        match self {
            MaterialRef::Bundled(n) => n,
            MaterialRef::Custom { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub material: MaterialRef,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackSpec {
    /// Photon energy in eV.
    pub energy_ev: f64,
    pub top: MaterialRef,
    pub bottom: MaterialRef,
    pub layers: Vec<LayerSpec>,
    pub resonant: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModesRequest {
    pub profile_points: usize,
    /// Cladding depth shown on either side of the layers.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BulkRequest {
    pub x: Grid<f64>,
    pub t: Grid<TimeValue>,
    pub omega: Grid<FrequencyValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LayoutKind {
    Constructive,
    Destructive,
    Custom,
}

impl LayoutKind {
    pub fn label(self) -> &'static str {
        match self {
            LayoutKind::Constructive => "constructive",
            LayoutKind::Destructive => "destructive",
            LayoutKind::Custom => "custom",
        }
    }
}

/// Where custom strip positions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PositionSource {
    Inline(Vec<f64>),
    /// An `index,x` file, relative to the scenario file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripsRequest {
    pub layouts: Vec<LayoutKind>,
    pub count: usize,
    pub width: f64,
    /// Added to every generated position.
    pub offset: f64,
    pub positions: Option<PositionSource>,
    /// Observation point for spectra; defaults to just past the last strip.
    pub observe: Option<f64>,
    /// On-resonance profile grid; defaults to the array plus two beat lengths.
    pub x: Option<Grid<f64>>,
    pub t: Grid<TimeValue>,
    pub omega: Grid<FrequencyValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRequest {
    pub counts: Vec<usize>,
    /// Resonant material shared equally among the strips of each count.
    pub total_width: f64,
    pub t: Grid<TimeValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub stack: StackSpec,
    pub species: NuclearSpecies<f64>,
    pub modes: ModesRequest,
    pub selection: ModeSelection,
    pub bulk: Option<BulkRequest>,
    pub strips: Option<StripsRequest>,
    pub sweep: Option<SweepRequest>,
}

fn default_time() -> Grid<TimeValue> {
    Grid { start: TimeValue::Lifetimes(0.0), stop: TimeValue::Lifetimes(5.0), count: 501 }
}

fn default_omega() -> Grid<FrequencyValue> {
    Grid { start: FrequencyValue::Linewidths(-20.0), stop: FrequencyValue::Linewidths(20.0), count: 401 }
}

fn parse_material(
    key: &str,
    token: &str,
    custom: &BTreeMap<String, RefractiveIndex<f64>>,
) -> Result<MaterialRef> {
    if let Some(index) = custom.get(token) {
        return Ok(MaterialRef::Custom { name: token.to_string(), index: *index });
    }
    if nuclear_waveguide::materials::bundled_names().any(|n| n.eq_ignore_ascii_case(token)) {
        return Ok(MaterialRef::Bundled(token.to_string()));
    }
    Err(bad(key, format!("unknown material `{token}` (bundled: Mo, B4C, Fe; or define [material {token}])")))
}

fn parse_species(doc: &mut Document) -> Result<NuclearSpecies<f64>> {
    let mut s = NuclearSpecies::<f64>::fe57();
    if let Some(v) = doc.take("species.energy") {
        s.e0_kev = parse_energy("species.energy", &v)? * 1e-3;
    }
    if let Some(v) = doc.take("species.linewidth") {
        s.gamma = parse_energy("species.linewidth", &v)? / HBAR_EV_S;
    }
    if let Some(v) = doc.take("species.conversion") {
        s.alpha = parse_plain("species.conversion", &v)?;
    }
    if let Some(v) = doc.take("species.lamb_moessbauer") {
        s.f_lm = parse_plain("species.lamb_moessbauer", &v)?;
    }
    if let Some(v) = doc.take("species.density") {
        s.rho_n = parse_density("species.density", &v)?;
    }
    for (key, slot) in [("species.spin_ground", &mut s.i_g), ("species.spin_excited", &mut s.i_e)] {
        if let Some(v) = doc.take(key) {
            *slot = v.parse::<HalfInt>().map_err(|m| bad(key, m))?;
        }
    }
    NuclearSpecies::new(s.e0_kev, s.gamma, s.alpha, s.f_lm, s.i_g, s.i_e, s.rho_n)
        .map_err(|e| ScenarioError::Invalid(format!("species: {e}")))
}

fn parse_stack(doc: &mut Document, species_energy_ev: f64) -> Result<StackSpec> {
    let mut custom = BTreeMap::new();
    let material_sections: Vec<String> = doc
        .sections
        .iter()
        .filter_map(|s| s.strip_prefix("material ").map(str::to_string))
        .collect();
    for name in material_sections {
        let dk = format!("material {name}.delta");
        let bk = format!("material {name}.beta");
        let delta = parse_plain(&dk, &doc.require(&dk)?)?;
        let beta = parse_plain(&bk, &doc.require(&bk)?)?;
        custom.insert(name, RefractiveIndex::from_delta_beta(delta, beta));
    }
    let energy_ev = match doc.take("stack.energy") {
        Some(v) => parse_energy("stack.energy", &v)?,
        None => species_energy_ev,
    };
    let top = parse_material("stack.top", &doc.require("stack.top")?, &custom)?;
    let bottom = parse_material("stack.bottom", &doc.require("stack.bottom")?, &custom)?;
    let raw = doc.take_all("stack.layer");
    if raw.is_empty() {
        return Err(ScenarioError::Missing("stack.layer".into()));
    }
    let mut layers = Vec::new();
    let mut resonant = Vec::new();
    for (line, text) in raw {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let key = format!("stack.layer (line {line})");
        let (material, thickness, marker) = match parts.as_slice() {
            [m, v, u] => (m, format!("{v} {u}"), None),
            [m, v, u, flag] => (m, format!("{v} {u}"), Some(*flag)),
            _ => return Err(bad(&key, "expected `<material> <thickness> <unit> [resonant]`")),
        };
        match marker {
            None => {}
            Some("resonant") => resonant.push(layers.len()),
            Some(other) => return Err(bad(&key, format!("unknown layer flag `{other}`"))),
        }
        let thickness = parse_length(&key, &thickness)?;
        if thickness <= 0.0 {
            return Err(bad(&key, "thickness must be positive"));
        }
        layers.push(LayerSpec { material: parse_material(&key, material, &custom)?, thickness });
    }
    let resonant = match resonant.as_slice() {
        [i] => *i,
        [] => return Err(ScenarioError::Invalid("no layer is marked `resonant`".into())),
        _ => return Err(ScenarioError::Invalid(format!("{} layers are marked `resonant`; exactly one is allowed", resonant.len()))),
    };
    Ok(StackSpec { energy_ev, top, bottom, layers, resonant })
}

fn parse_layouts(text: &str) -> Result<Vec<LayoutKind>> {
    Ok(match text.trim() {
        "constructive" => vec![LayoutKind::Constructive],
        "destructive" => vec![LayoutKind::Destructive],
        "both" => vec![LayoutKind::Constructive, LayoutKind::Destructive],
        "custom" => vec![LayoutKind::Custom],
        other => {
            return Err(bad(
                "strips.layout",
                format!("`{other}` is not one of constructive, destructive, both, custom"),
            ))
        }
    })
}

fn parse_strips(doc: &mut Document) -> Result<StripsRequest> {
    let layouts = parse_layouts(&doc.require("strips.layout")?)?;
    let width = parse_length("strips.width", &doc.require("strips.width")?)?;
    if width <= 0.0 {
        return Err(bad("strips.width", "must be positive"));
    }
    let offset = match doc.take("strips.offset") {
        Some(v) => parse_length("strips.offset", &v)?,
        None => 0.0,
    };
    let inline = doc.take("strips.positions");
    let file = doc.take("strips.layout_file");
    let positions = match (inline, file) {
        (Some(_), Some(_)) => return Err(ScenarioError::Invalid("give either strips.positions or strips.layout_file".into())),
        (Some(list), None) => Some(PositionSource::Inline(
            list.split(',')
                .map(|s| parse_length("strips.positions", s))
                .collect::<Result<_>>()?,
        )),
        (None, Some(path)) => Some(PositionSource::File(PathBuf::from(path))),
        (None, None) => None,
    };
    let custom = layouts.contains(&LayoutKind::Custom);
    if custom && positions.is_none() {
        return Err(ScenarioError::Missing("strips.positions".into()));
    }
    if !custom && positions.is_some() {
        return Err(ScenarioError::Invalid("explicit positions need `layout = custom`".into()));
    }
    let count = match doc.take("strips.count") {
        Some(v) => parse_count("strips.count", &v)?,
        None if custom => 0,
        None => return Err(ScenarioError::Missing("strips.count".into())),
    };
    if !custom && count == 0 {
        return Err(bad("strips.count", "need at least one strip"));
    }
    let observe = doc.take("strips.observe").map(|v| parse_length("strips.observe", &v)).transpose()?;
    Ok(StripsRequest {
        layouts,
        count,
        width,
        offset,
        positions,
        observe,
        x: take_grid(doc, "strips.x", parse_length, None)?,
        t: take_grid(doc, "strips.t", TimeValue::parse, Some(default_time()))?.expect("default"),
        omega: take_grid(doc, "strips.omega", FrequencyValue::parse, Some(default_omega()))?.expect("default"),
    })
}

fn parse_sweep(doc: &mut Document) -> Result<SweepRequest> {
    let counts: Vec<usize> = doc
        .require("sweep.counts")?
        .split(',')
        .map(|s| parse_count("sweep.counts", s))
        .collect::<Result<_>>()?;
    if counts.is_empty() || counts.contains(&0) {
        return Err(bad("sweep.counts", "counts must be positive"));
    }
    let total_width = parse_length("sweep.total_width", &doc.require("sweep.total_width")?)?;
    if total_width <= 0.0 {
        return Err(bad("sweep.total_width", "must be positive"));
    }
    Ok(SweepRequest {
        counts,
        total_width,
        t: take_grid(doc, "sweep.t", TimeValue::parse, Some(default_time()))?.expect("default"),
    })
}

fn resolved<Q: Copy>(prefix: &str, g: &Grid<Q>, to_si: impl Fn(Q) -> f64) -> Result<()> {
    check_grid(prefix, to_si(g.start), to_si(g.stop), g.count)
}

impl Scenario {
    /// Checks grids once the linewidth is known.
    fn validate(&self) -> Result<()> {
        let g = self.species.gamma;
        if let Some(b) = &self.bulk {
            resolved("bulk.x", &b.x, |v| v)?;
            if b.x.start < 0.0 {
                return Err(bad("bulk.x_start", "distance must be non-negative"));
            }
            resolved("bulk.t", &b.t, |v| v.seconds(g))?;
            resolved("bulk.omega", &b.omega, |v| v.per_second(g))?;
        }
        if let Some(s) = &self.strips {
            if let Some(x) = &s.x {
                resolved("strips.x", x, |v| v)?;
            }
            resolved("strips.t", &s.t, |v| v.seconds(g))?;
            resolved("strips.omega", &s.omega, |v| v.per_second(g))?;
        }
        if let Some(s) = &self.sweep {
            resolved("sweep.t", &s.t, |v| v.seconds(g))?;
        }
        Ok(())
    }
}

/// Parses and validates a scenario, filling defaults (⁵⁷Fe constants, time
/// and detuning grids).
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut doc = Document::parse(text)?;
    const KNOWN: [&str; 7] = ["stack", "species", "input", "modes", "bulk", "strips", "sweep"];
    if let Some(s) = doc.sections.iter().find(|s| !KNOWN.contains(&s.as_str()) && !s.starts_with("material ")) {
        return Err(ScenarioError::Invalid(format!("unknown section [{s}]")));
    }
    let species = parse_species(&mut doc)?;
    let stack = parse_stack(&mut doc, species.e0_kev * 1e3)?;
    let selection = match doc.take("input.modes").as_deref() {
        None | Some("dominant") => ModeSelection::Dominant,
        Some("all") => ModeSelection::All,
        Some(other) => return Err(bad("input.modes", format!("`{other}` is not `dominant` or `all`"))),
    };
    let modes = ModesRequest {
        profile_points: match doc.take("modes.profile_points") {
            Some(v) => parse_count("modes.profile_points", &v)?.max(2),
            None => 401,
        },
        margin: match doc.take("modes.margin") {
            Some(v) => parse_length("modes.margin", &v)?,
            None => 20e-9,
        },
    };
    let bulk = if doc.has_section("bulk") {
        Some(BulkRequest {
            x: take_grid(&mut doc, "bulk.x", parse_length, None)?.ok_or_else(|| ScenarioError::Missing("bulk.x_start".into()))?,
            t: take_grid(&mut doc, "bulk.t", TimeValue::parse, Some(default_time()))?.expect("default"),
            omega: take_grid(&mut doc, "bulk.omega", FrequencyValue::parse, Some(default_omega()))?.expect("default"),
        })
    } else {
        None
    };
    let strips = if doc.has_section("strips") { Some(parse_strips(&mut doc)?) } else { None };
    let sweep = if doc.has_section("sweep") { Some(parse_sweep(&mut doc)?) } else { None };
    if !doc.entries.is_empty() {
        return Err(ScenarioError::UnknownKeys(doc.entries.keys().cloned().collect()));
    }
    let scenario = Scenario { stack, species, modes, selection, bulk, strips, sweep };
    scenario.validate()?;
    Ok(scenario)
}
