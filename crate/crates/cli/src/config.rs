//! The `levkit-config/1` run document.
//!
//! Physical values are strings with an explicit unit ("5 um", "300 K");
//! counts and ratios are plain numbers. Unknown keys are rejected, and a
//! unit of the wrong dimension is a parse error. [`RunConfig::normalized`]
//! rewrites every value in canonical SI form with all defaults filled in,
//! and is a fixed point of parse → normalize.

use std::path::PathBuf;

use levkit_core::dynamics::{ImpulseEvent, InitialState, Integrator, SimulationConfig};
use levkit_core::limits::{log_grid, Capacitor, ChargeMode, Halo, SearchPlan};
use levkit_core::newforces::{AttractorGeometry, FingerArray, FluidCapillary, PlaneSlab};
use levkit_core::quantities::units::{format_si, parse_as};
use levkit_core::quantities::{convert_mediator_mass_to_range, to_ev};
use levkit_core::sensor::{
    sql_force_asd, thermal_force_asd, Spectrum, SILICA_DENSITY, SILICA_PERMITTIVITY,
};
use levkit_core::{Dimension, NoiseModel, Quantity, Sphere, TrapState, CODATA_2018};
use serde::{Deserialize, Serialize};

use crate::error::{Failure, Outcome};

use Dimension::*;

pub const CONFIG_SCHEMA: &str = "levkit-config/1";

/// Sphere materials known by name: (label, density kg/m³, relative permittivity).
/// Fused silica, as supplied for levitation experiments.
const MATERIALS: &[(&str, f64, f64)] = &[("silica", SILICA_DENSITY, SILICA_PERMITTIVITY)];

const DEFAULT_PSD_SEGMENT: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    /// Free text carried along into provenance (sources, remarks).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<SphereSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halo: Option<HaloSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSection {
    pub material: String,
    pub diameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_permittivity: Option<f64>,
    /// Whole number of elementary charges, e.g. "3 e".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_charge: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub resonant_frequency: String,
    /// Gas damping rate γ, 1/s.
    pub damping_rate: String,
    pub temperature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback_gain: Option<f64>,
    /// Alternative to `feedback_gain`: the cold-damped COM temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_temperature: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub time_step: String,
    pub duration: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_decimation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<Integrator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short_run: Option<bool>,
    /// Welch segment length in samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd_segment: Option<usize>,
    /// Band for the Lorentzian fit; defaults to [f0/2, 2 f0].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_band: Option<[String; 2]>,
    /// Every n-th sample goes into the trajectory file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_alarm_rate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulses: Option<Vec<ImpulseSection>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseSection {
    pub time: String,
    pub momentum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum GeometrySection {
    PlaneSlab(SlabSection),
    FingerArray(FingerSection),
    FluidCapillary(CapillarySection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabSection {
    /// A length, or "inf" for a half-space.
    pub thickness: String,
    pub density_contrast: String,
    pub distance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FingerSection {
    pub finger_width: String,
    pub finger_height: String,
    pub density_a: String,
    pub density_b: String,
    pub distance: String,
    pub drive_amplitude: String,
    pub drive_frequency: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_offset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shield_thickness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapillarySection {
    pub inner_diameter: String,
    pub droplet_length: String,
    pub density_a: String,
    pub density_b: String,
    pub distance: String,
    pub modulation_frequency: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shield_thickness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub noise: NoiseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration_time: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_frequency: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonic: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacitor: Option<CapacitorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge_mode: Option<ChargeMode>,
    /// Applied field for the millicharge and neutrality cases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dm: Option<DmSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub thermal: bool,
    #[serde(default)]
    pub sql: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<NoiseTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseTable {
    pub frequencies: Vec<String>,
    pub asds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitorSection {
    pub voltage: String,
    pub spacing: String,
    pub standoff: String,
}

/// Either an explicit list or a log grid `from`..`to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_decade: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmSection {
    pub masses: GridSection,
    /// "0 eV" for a massless mediator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mediator_mass: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mediator_range: Option<String>,
    /// Explicit threshold; otherwise estimated from a noise-only simulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_alarm_rate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HaloSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_escape: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_earth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

/// Resolved DM case inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DmSettings {
    pub masses_ev: Vec<f64>,
    /// m; infinite for a massless mediator.
    pub mediator_range: f64,
    pub q_min: Option<f64>,
    pub false_alarm_rate: Option<f64>,
}

fn qty(path: &str, text: &str, dim: Dimension) -> Outcome<f64> {
    parse_as(text, dim).map_err(|e| Failure::from(e).at(path))
}

fn canon(path: &str, text: &str, dim: Dimension) -> Outcome<String> {
    Ok(format_si(qty(path, text, dim)?, dim))
}

fn canon_opt(path: &str, text: &Option<String>, dim: Dimension) -> Outcome<Option<String>> {
    text.as_deref().map(|t| canon(path, t, dim)).transpose()
}

fn length_or_inf(path: &str, text: &str) -> Outcome<f64> {
    if text.trim() == "inf" {
        Ok(f64::INFINITY)
    } else {
        qty(path, text, Length)
    }
}

fn core<T>(path: &str, r: levkit_core::Result<T>) -> Outcome<T> {
    r.map_err(|e| Failure::from(e).at(path))
}

fn required<'a, T>(value: &'a Option<T>, path: &str) -> Outcome<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Failure::config(format!("{path}: missing required key")))
}

fn check_number(path: &str, value: f64) -> Outcome<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Failure::config(format!("{path}: must be finite")))
    }
}

/// Turns a serde error at `path` into a message naming the full key path.
fn describe(path: &str, message: &str) -> String {
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            let key = &rest[..end];
            return if path == "." {
                format!("{key}: missing required key")
            } else {
                format!("{path}.{key}: missing required key")
            };
        }
    }
    if path == "." {
        message.to_string()
    } else {
        format!("{path}: {message}")
    }
}

impl GridSection {
    fn resolve(&self, path: &str, dim: Dimension) -> Outcome<Vec<f64>> {
        match (&self.values, &self.from, &self.to, self.per_decade) {
            (Some(values), None, None, None) => {
                if values.is_empty() {
                    return Err(Failure::config(format!("{path}.values: empty grid")));
                }
                let grid = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| qty(&format!("{path}.values[{i}]"), v, dim))
                    .collect::<Outcome<Vec<_>>>()?;
                if grid.iter().any(|v| !(*v > 0.0)) || grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Failure::config(format!(
                        "{path}.values: must be positive and strictly increasing"
                    )));
                }
                Ok(grid)
            }
            (None, Some(from), Some(to), Some(per_decade)) => {
                let lo = qty(&format!("{path}.from"), from, dim)?;
                let hi = qty(&format!("{path}.to"), to, dim)?;
                core(path, log_grid(lo, hi, per_decade))
            }
            _ => Err(Failure::config(format!(
                "{path}: give either `values` or all of `from`, `to`, `per_decade`"
            ))),
        }
    }

    fn normalized(&self, path: &str, dim: Dimension) -> Outcome<GridSection> {
        self.resolve(path, dim)?;
        Ok(GridSection {
            values: self
                .values
                .as_ref()
                .map(|vs| {
                    vs.iter()
                        .map(|v| canon(path, v, dim))
                        .collect::<Outcome<Vec<_>>>()
                })
                .transpose()?,
            from: canon_opt(path, &self.from, dim)?,
            to: canon_opt(path, &self.to, dim)?,
            per_decade: self.per_decade,
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Outcome<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Failure::config(describe(&path, &e.into_inner().to_string()))
        })?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Failure::config(format!(
                "schema: expected {CONFIG_SCHEMA:?}, found {:?}",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    /// Single-line form for provenance headers.
    pub fn to_compact_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn sphere(&self) -> Outcome<Sphere> {
        let s = required(&self.sphere, "sphere")?;
        let diameter = qty("sphere.diameter", &s.diameter, Length)?;
        let known = MATERIALS.iter().find(|(label, _, _)| *label == s.material);
        let density = match (&s.density, known) {
            (Some(d), _) => qty("sphere.density", d, Density)?,
            (None, Some(&(_, d, _))) => d,
            (None, None) => {
                return Err(Failure::config(format!(
                    "sphere.density: required for material {:?} (known: {})",
                    s.material,
                    MATERIALS.iter().map(|m| m.0).collect::<Vec<_>>().join(", ")
                )))
            }
        };
        let permittivity = match (s.relative_permittivity, known) {
            (Some(e), _) => check_number("sphere.relative_permittivity", e)?,
            (None, Some(&(_, _, e))) => e,
            (None, None) => {
                return Err(Failure::config(format!(
                    "sphere.relative_permittivity: required for material {:?}",
                    s.material
                )))
            }
        };
        let charge = match &s.net_charge {
            Some(text) => {
                let n = qty("sphere.net_charge", text, Charge)? / CODATA_2018.e;
                if (n - n.round()).abs() > 1e-6 || n.abs() > 1e15 {
                    return Err(Failure::config(format!(
                        "sphere.net_charge: {text:?} is not a whole number of e"
                    )));
                }
                n.round() as i64
            }
            None => 0,
        };
        core(
            "sphere",
            Sphere::new(
                diameter / 2.0,
                density,
                permittivity,
                charge,
                s.material.clone(),
            ),
        )
    }

    pub fn trap(&self) -> Outcome<TrapState> {
        let t = required(&self.trap, "trap")?;
        let f0 = qty("trap.resonant_frequency", &t.resonant_frequency, Frequency)?;
        let gamma = qty("trap.damping_rate", &t.damping_rate, Frequency)?;
        let temperature = qty("trap.temperature", &t.temperature, Temperature)?;
        let open = core("trap", TrapState::new(f0, gamma, temperature, 0.0))?;
        let gain = match (t.feedback_gain, &t.effective_temperature) {
            (Some(_), Some(_)) => {
                return Err(Failure::config(
                    "trap: give feedback_gain or effective_temperature, not both",
                ))
            }
            (Some(g), None) => check_number("trap.feedback_gain", g)?,
            (None, Some(text)) => {
                let target = qty("trap.effective_temperature", text, Temperature)?;
                core(
                    "trap.effective_temperature",
                    open.gain_for_temperature(target),
                )?
            }
            (None, None) => 0.0,
        };
        core("trap.feedback_gain", open.with_feedback_gain(gain))
    }

    pub fn simulation(&self, trap: &TrapState) -> Outcome<SimulationConfig> {
        let s = required(&self.simulation, "simulation")?;
        let time_step = qty("simulation.time_step", &s.time_step, Time)?;
        let duration = qty("simulation.duration", &s.duration, Time)?;
        let config = SimulationConfig {
            time_step,
            duration,
            rng_seed: s.seed,
            bath_temperature: trap.temperature(),
            feedback_gain: trap.feedback_gain(),
            record_decimation: s.record_decimation.unwrap_or(1),
            integrator: s.integrator.unwrap_or_default(),
            initial_state: InitialState::Equilibrium,
            short_run: s.short_run.unwrap_or(false),
        };
        core("simulation", config.validate(trap))?;
        Ok(config)
    }

    pub fn psd_segment(&self) -> usize {
        self.simulation
            .as_ref()
            .and_then(|s| s.psd_segment)
            .unwrap_or(DEFAULT_PSD_SEGMENT)
    }

    pub fn trajectory_stride(&self) -> usize {
        self.simulation
            .as_ref()
            .and_then(|s| s.trajectory_stride)
            .unwrap_or(1)
            .max(1)
    }

    pub fn fit_band(&self, trap: &TrapState) -> Outcome<(f64, f64)> {
        let f0 = trap.resonant_frequency();
        match self.simulation.as_ref().and_then(|s| s.fit_band.as_ref()) {
            Some([lo, hi]) => {
                let lo = qty("simulation.fit_band[0]", lo, Frequency)?;
                let hi = qty("simulation.fit_band[1]", hi, Frequency)?;
                if !(hi > lo && lo > 0.0) {
                    return Err(Failure::config("simulation.fit_band: need 0 < lo < hi"));
                }
                Ok((lo, hi))
            }
            None => Ok((0.5 * f0, 2.0 * f0)),
        }
    }

    pub fn simulation_false_alarm_rate(&self) -> Outcome<Option<f64>> {
        self.simulation
            .as_ref()
            .and_then(|s| s.false_alarm_rate.as_deref())
            .map(|t| qty("simulation.false_alarm_rate", t, Frequency))
            .transpose()
    }

    pub fn impulses(&self) -> Outcome<Vec<ImpulseEvent>> {
        let Some(list) = self.simulation.as_ref().and_then(|s| s.impulses.as_ref()) else {
            return Ok(Vec::new());
        };
        list.iter()
            .enumerate()
            .map(|(i, ev)| {
                let path = format!("simulation.impulses[{i}]");
                let time = qty(&format!("{path}.time"), &ev.time, Time)?;
                let momentum = qty(&format!("{path}.momentum"), &ev.momentum, Momentum)?;
                core(
                    &path,
                    ImpulseEvent::new(time, momentum, ev.direction.unwrap_or(1.0)),
                )
            })
            .collect()
    }

    pub fn geometry(&self) -> Outcome<Option<AttractorGeometry>> {
        let Some(g) = &self.geometry else {
            return Ok(None);
        };
        let shield = |t: &Option<String>| -> Outcome<Option<f64>> {
            t.as_deref()
                .map(|t| qty("geometry.shield_thickness", t, Length))
                .transpose()
        };
        Ok(Some(match g {
            GeometrySection::PlaneSlab(s) => AttractorGeometry::PlaneSlab(PlaneSlab {
                thickness: length_or_inf("geometry.thickness", &s.thickness)?,
                density_contrast: qty("geometry.density_contrast", &s.density_contrast, Density)?,
                distance: qty("geometry.distance", &s.distance, Length)?,
            }),
            GeometrySection::FingerArray(f) => AttractorGeometry::FingerArray(FingerArray {
                finger_width: qty("geometry.finger_width", &f.finger_width, Length)?,
                finger_height: qty("geometry.finger_height", &f.finger_height, Length)?,
                density_a: qty("geometry.density_a", &f.density_a, Density)?,
                density_b: qty("geometry.density_b", &f.density_b, Density)?,
                distance: qty("geometry.distance", &f.distance, Length)?,
                drive_amplitude: qty("geometry.drive_amplitude", &f.drive_amplitude, Length)?,
                drive_frequency: qty("geometry.drive_frequency", &f.drive_frequency, Frequency)?,
                lateral_offset: match &f.lateral_offset {
                    Some(t) => qty("geometry.lateral_offset", t, Length)?,
                    None => 0.0,
                },
                shield_thickness: shield(&f.shield_thickness)?,
            }),
            GeometrySection::FluidCapillary(c) => {
                AttractorGeometry::FluidCapillary(FluidCapillary {
                    inner_diameter: qty("geometry.inner_diameter", &c.inner_diameter, Length)?,
                    droplet_length: qty("geometry.droplet_length", &c.droplet_length, Length)?,
                    density_a: qty("geometry.density_a", &c.density_a, Density)?,
                    density_b: qty("geometry.density_b", &c.density_b, Density)?,
                    distance: qty("geometry.distance", &c.distance, Length)?,
                    modulation_frequency: qty(
                        "geometry.modulation_frequency",
                        &c.modulation_frequency,
                        Frequency,
                    )?,
                    shield_thickness: shield(&c.shield_thickness)?,
                })
            }
        }))
    }

    /// The plan's noise model; without a plan section, thermal plus SQL.
    pub fn noise(&self, sphere: &Sphere, trap: &TrapState) -> Outcome<NoiseModel> {
        let Some(plan) = &self.plan else {
            return core("noise", NoiseModel::standard(sphere, trap, None));
        };
        let n = &plan.noise;
        let mut model = NoiseModel::new();
        if n.thermal {
            core(
                "plan.noise.thermal",
                model.add(
                    "thermal",
                    Spectrum::White {
                        asd: thermal_force_asd(sphere, trap).value(),
                    },
                ),
            )?;
        }
        if n.sql {
            core(
                "plan.noise.sql",
                model.add(
                    "sql",
                    Spectrum::White {
                        asd: sql_force_asd(sphere, trap).value(),
                    },
                ),
            )?;
        }
        if let Some(floor) = &n.floor {
            let asd = qty("plan.noise.floor", floor, ForceAsd)?;
            core(
                "plan.noise.floor",
                model.add("floor", Spectrum::White { asd }),
            )?;
        }
        if let Some(table) = &n.table {
            let freqs = table
                .frequencies
                .iter()
                .enumerate()
                .map(|(i, t)| qty(&format!("plan.noise.table.frequencies[{i}]"), t, Frequency))
                .collect::<Outcome<Vec<_>>>()?;
            let asds = table
                .asds
                .iter()
                .enumerate()
                .map(|(i, t)| qty(&format!("plan.noise.table.asds[{i}]"), t, ForceAsd))
                .collect::<Outcome<Vec<_>>>()?;
            let spectrum = core("plan.noise.table", Spectrum::table(freqs, asds))?;
            core("plan.noise.table", model.add("table", spectrum))?;
        }
        if model.contributions().is_empty() {
            return Err(Failure::config("plan.noise: no contributions enabled"));
        }
        Ok(model)
    }

    pub fn plan(&self) -> Outcome<SearchPlan> {
        let p = required(&self.plan, "plan")?;
        let sphere = self.sphere()?;
        let trap = self.trap()?;
        let noise = self.noise(&sphere, &trap)?;
        let integration_time = qty(
            "plan.integration_time",
            required(&p.integration_time, "plan.integration_time")?,
            Time,
        )?;
        let mut plan = core(
            "plan",
            SearchPlan::new(sphere, trap, noise, integration_time),
        )?;
        plan.signal_frequency = p
            .signal_frequency
            .as_deref()
            .map(|t| qty("plan.signal_frequency", t, Frequency))
            .transpose()?;
        plan.geometry = self.geometry()?;
        plan.harmonic = p.harmonic.unwrap_or(1);
        plan.capacitor = p
            .capacitor
            .as_ref()
            .map(|c| -> Outcome<Capacitor> {
                Ok(Capacitor {
                    voltage: qty("plan.capacitor.voltage", &c.voltage, Voltage)?,
                    spacing: qty("plan.capacitor.spacing", &c.spacing, Length)?,
                    standoff: qty("plan.capacitor.standoff", &c.standoff, Length)?,
                })
            })
            .transpose()?;
        plan.charge_mode = p.charge_mode.unwrap_or_default();
        plan.significance = check_number("plan.significance", p.significance.unwrap_or(1.0))?;
        plan.array_size = p.array_size.unwrap_or(1);
        core("plan", plan.validate())?;
        Ok(plan)
    }

    pub fn frequencies(&self) -> Outcome<Vec<f64>> {
        let p = required(&self.plan, "plan")?;
        required(&p.frequencies, "plan.frequencies")?.resolve("plan.frequencies", Frequency)
    }

    pub fn ranges(&self) -> Outcome<Vec<f64>> {
        let p = required(&self.plan, "plan")?;
        required(&p.ranges, "plan.ranges")?.resolve("plan.ranges", Length)
    }

    pub fn field(&self) -> Outcome<f64> {
        let p = required(&self.plan, "plan")?;
        qty(
            "plan.field",
            required(&p.field, "plan.field")?,
            ElectricField,
        )
    }

    pub fn dm(&self) -> Outcome<DmSettings> {
        let p = required(&self.plan, "plan")?;
        let d = required(&p.dm, "plan.dm")?;
        let masses_ev = d
            .masses
            .resolve("plan.dm.masses", Energy)?
            .into_iter()
            .map(to_ev)
            .collect();
        let mediator_range = match (&d.mediator_mass, &d.mediator_range) {
            (Some(m), None) => {
                let energy = qty("plan.dm.mediator_mass", m, Energy)?;
                if energy == 0.0 {
                    f64::INFINITY
                } else {
                    let q = core("plan.dm.mediator_mass", Quantity::energy(energy))?;
                    core("plan.dm.mediator_mass", convert_mediator_mass_to_range(q))?.value()
                }
            }
            (None, Some(r)) => length_or_inf("plan.dm.mediator_range", r)?,
            _ => {
                return Err(Failure::config(
                    "plan.dm: give exactly one of mediator_mass, mediator_range",
                ))
            }
        };
        if !(mediator_range > 0.0) {
            return Err(Failure::config("plan.dm: mediator range must be > 0"));
        }
        Ok(DmSettings {
            masses_ev,
            mediator_range,
            q_min: d
                .q_min
                .as_deref()
                .map(|t| qty("plan.dm.q_min", t, Momentum))
                .transpose()?,
            false_alarm_rate: d
                .false_alarm_rate
                .as_deref()
                .map(|t| qty("plan.dm.false_alarm_rate", t, Frequency))
                .transpose()?,
        })
    }

    pub fn halo(&self) -> Outcome<Halo> {
        let mut halo = Halo::default();
        if let Some(h) = &self.halo {
            let set = |slot: &mut f64, text: &Option<String>, path: &str, dim| -> Outcome<()> {
                if let Some(t) = text {
                    *slot = qty(path, t, dim)?;
                }
                Ok(())
            };
            set(&mut halo.density, &h.density, "halo.density", Density)?;
            set(&mut halo.v0, &h.v0, "halo.v0", Velocity)?;
            set(&mut halo.v_escape, &h.v_escape, "halo.v_escape", Velocity)?;
            set(&mut halo.v_earth, &h.v_earth, "halo.v_earth", Velocity)?;
        }
        core("halo", halo.validate())?;
        Ok(halo)
    }

    /// Output directory and file stem.
    pub fn output(&self, default_stem: &str) -> (PathBuf, String) {
        let o = self.output.as_ref();
        let dir = o
            .and_then(|o| o.directory.clone())
            .unwrap_or_else(|| ".".into());
        let stem = o
            .and_then(|o| o.stem.clone())
            .unwrap_or_else(|| default_stem.into());
        (PathBuf::from(dir), stem)
    }

    /// Canonical form: SI values, defaults written out, every present
    /// section validated.
    pub fn normalized(&self, default_stem: &str) -> Outcome<RunConfig> {
        let sphere = match &self.sphere {
            Some(s) => {
                let resolved = self.sphere()?;
                Some(SphereSection {
                    material: s.material.clone(),
                    diameter: format_si(resolved.diameter(), Length),
                    density: Some(format_si(resolved.density(), Density)),
                    relative_permittivity: Some(resolved.relative_permittivity()),
                    net_charge: Some(format!("{} e", resolved.net_charge())),
                })
            }
            None => None,
        };
        let trap_state = self.trap.as_ref().map(|_| self.trap()).transpose()?;
        let trap = trap_state.map(|t| TrapSection {
            resonant_frequency: format_si(t.resonant_frequency(), Frequency),
            damping_rate: format_si(t.damping_rate(), Frequency),
            temperature: format_si(t.temperature(), Temperature),
            feedback_gain: Some(t.feedback_gain()),
            effective_temperature: None,
        });
        let simulation = match &self.simulation {
            Some(s) => {
                let t = trap_state
                    .ok_or_else(|| Failure::config("simulation: needs a trap section"))?;
                let c = self.simulation(&t)?;
                let (lo, hi) = self.fit_band(&t)?;
                self.impulses()?;
                Some(SimulationSection {
                    time_step: format_si(c.time_step, Time),
                    duration: format_si(c.duration, Time),
                    seed: c.rng_seed,
                    record_decimation: Some(c.record_decimation),
                    integrator: Some(c.integrator),
                    short_run: Some(c.short_run),
                    psd_segment: Some(self.psd_segment()),
                    fit_band: Some([format_si(lo, Frequency), format_si(hi, Frequency)]),
                    trajectory_stride: Some(self.trajectory_stride()),
                    false_alarm_rate: canon_opt(
                        "simulation.false_alarm_rate",
                        &s.false_alarm_rate,
                        Frequency,
                    )?,
                    impulses: Some(
                        s.impulses
                            .iter()
                            .flatten()
                            .map(|ev| -> Outcome<ImpulseSection> {
                                Ok(ImpulseSection {
                                    time: canon("simulation.impulses.time", &ev.time, Time)?,
                                    momentum: canon(
                                        "simulation.impulses.momentum",
                                        &ev.momentum,
                                        Momentum,
                                    )?,
                                    direction: Some(ev.direction.unwrap_or(1.0)),
                                })
                            })
                            .collect::<Outcome<Vec<_>>>()?,
                    ),
                })
            }
            None => None,
        };
        let geometry = self.geometry()?.map(|g| match g {
            AttractorGeometry::PlaneSlab(s) => GeometrySection::PlaneSlab(SlabSection {
                thickness: if s.thickness.is_infinite() {
                    "inf".into()
                } else {
                    format_si(s.thickness, Length)
                },
                density_contrast: format_si(s.density_contrast, Density),
                distance: format_si(s.distance, Length),
            }),
            AttractorGeometry::FingerArray(f) => GeometrySection::FingerArray(FingerSection {
                finger_width: format_si(f.finger_width, Length),
                finger_height: format_si(f.finger_height, Length),
                density_a: format_si(f.density_a, Density),
                density_b: format_si(f.density_b, Density),
                distance: format_si(f.distance, Length),
                drive_amplitude: format_si(f.drive_amplitude, Length),
                drive_frequency: format_si(f.drive_frequency, Frequency),
                lateral_offset: Some(format_si(f.lateral_offset, Length)),
                shield_thickness: f.shield_thickness.map(|t| format_si(t, Length)),
            }),
            AttractorGeometry::FluidCapillary(c) => {
                GeometrySection::FluidCapillary(CapillarySection {
                    inner_diameter: format_si(c.inner_diameter, Length),
                    droplet_length: format_si(c.droplet_length, Length),
                    density_a: format_si(c.density_a, Density),
                    density_b: format_si(c.density_b, Density),
                    distance: format_si(c.distance, Length),
                    modulation_frequency: format_si(c.modulation_frequency, Frequency),
                    shield_thickness: c.shield_thickness.map(|t| format_si(t, Length)),
                })
            }
        });
        let plan = match &self.plan {
            Some(p) => Some(self.normalized_plan(p)?),
            None => None,
        };
        let halo = match &self.halo {
            Some(_) => {
                let h = self.halo()?;
                Some(HaloSection {
                    density: Some(format_si(h.density, Density)),
                    v0: Some(format_si(h.v0, Velocity)),
                    v_escape: Some(format_si(h.v_escape, Velocity)),
                    v_earth: Some(format_si(h.v_earth, Velocity)),
                })
            }
            None => None,
        };
        let (dir, stem) = self.output(default_stem);
        Ok(RunConfig {
            schema: CONFIG_SCHEMA.into(),
            notes: self.notes.clone(),
            sphere,
            trap,
            simulation,
            geometry,
            plan,
            halo,
            output: Some(OutputSection {
                directory: Some(dir.to_string_lossy().into_owned()),
                stem: Some(stem),
            }),
        })
    }

    fn normalized_plan(&self, p: &PlanSection) -> Outcome<PlanSection> {
        if self.sphere.is_some() && self.trap.is_some() {
            let (s, t) = (self.sphere()?, self.trap()?);
            self.noise(&s, &t)?;
            if p.integration_time.is_some() {
                self.plan()?;
            }
        }
        let n = &p.noise;
        let noise = NoiseSection {
            thermal: n.thermal,
            sql: n.sql,
            floor: canon_opt("plan.noise.floor", &n.floor, ForceAsd)?,
            table: n
                .table
                .as_ref()
                .map(|t| -> Outcome<NoiseTable> {
                    Ok(NoiseTable {
                        frequencies: t
                            .frequencies
                            .iter()
                            .map(|f| canon("plan.noise.table.frequencies", f, Frequency))
                            .collect::<Outcome<_>>()?,
                        asds: t
                            .asds
                            .iter()
                            .map(|a| canon("plan.noise.table.asds", a, ForceAsd))
                            .collect::<Outcome<_>>()?,
                    })
                })
                .transpose()?,
        };
        let dm = match &p.dm {
            Some(d) => {
                self.dm()?;
                Some(DmSection {
                    masses: d.masses.normalized("plan.dm.masses", Energy)?,
                    mediator_mass: canon_opt("plan.dm.mediator_mass", &d.mediator_mass, Energy)?,
                    mediator_range: match &d.mediator_range {
                        Some(r) if r.trim() == "inf" => Some("inf".into()),
                        other => canon_opt("plan.dm.mediator_range", other, Length)?,
                    },
                    q_min: canon_opt("plan.dm.q_min", &d.q_min, Momentum)?,
                    false_alarm_rate: canon_opt(
                        "plan.dm.false_alarm_rate",
                        &d.false_alarm_rate,
                        Frequency,
                    )?,
                })
            }
            None => None,
        };
        Ok(PlanSection {
            noise,
            integration_time: canon_opt("plan.integration_time", &p.integration_time, Time)?,
            significance: Some(check_number(
                "plan.significance",
                p.significance.unwrap_or(1.0),
            )?),
            array_size: Some(p.array_size.unwrap_or(1)),
            signal_frequency: canon_opt("plan.signal_frequency", &p.signal_frequency, Frequency)?,
            harmonic: Some(p.harmonic.unwrap_or(1)),
            capacitor: p
                .capacitor
                .as_ref()
                .map(|c| -> Outcome<CapacitorSection> {
                    Ok(CapacitorSection {
                        voltage: canon("plan.capacitor.voltage", &c.voltage, Voltage)?,
                        spacing: canon("plan.capacitor.spacing", &c.spacing, Length)?,
                        standoff: canon("plan.capacitor.standoff", &c.standoff, Length)?,
                    })
                })
                .transpose()?,
            charge_mode: Some(p.charge_mode.unwrap_or_default()),
            field: canon_opt("plan.field", &p.field, ElectricField)?,
            ranges: p
                .ranges
                .as_ref()
                .map(|g| g.normalized("plan.ranges", Length))
                .transpose()?,
            frequencies: p
                .frequencies
                .as_ref()
                .map(|g| g.normalized("plan.frequencies", Frequency))
                .transpose()?,
            dm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": "levkit-config/1",
        "sphere": { "material": "silica", "diameter": "10 um" },
        "trap": { "resonant_frequency": "100 Hz", "damping_rate": "1e-3 1/s", "temperature": "300 K" }
    }"#;

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = MINIMAL.replace("\"diameter\"", "\"radius\": \"5 um\", \"diameter\"");
        let Failure::Config(msg) = RunConfig::parse(&text).unwrap_err() else {
            panic!()
        };
        assert!(msg.contains("sphere") && msg.contains("radius"), "{msg}");
    }

    #[test]
    fn missing_keys_report_full_path() {
        let text = MINIMAL.replace("\"temperature\": \"300 K\"", "\"feedback_gain\": 1");
        let Failure::Config(msg) = RunConfig::parse(&text).unwrap_err() else {
            panic!()
        };
        assert!(msg.contains("trap.temperature: missing"), "{msg}");
    }

    #[test]
    fn wrong_dimension_is_a_config_error() {
        let cfg = RunConfig::parse(&MINIMAL.replace("\"10 um\"", "\"10 Hz\"")).unwrap();
        let Failure::Config(msg) = cfg.sphere().unwrap_err() else {
            panic!()
        };
        assert!(msg.starts_with("sphere.diameter"), "{msg}");
    }

    #[test]
    fn effective_temperature_sets_gain() {
        let text = MINIMAL.replace(
            "\"300 K\"",
            "\"300 K\", \"effective_temperature\": \"200 uK\"",
        );
        let trap = RunConfig::parse(&text).unwrap().trap().unwrap();
        assert!((trap.effective_temperature() / 200e-6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_a_fixed_point() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let once = cfg.normalized("x").unwrap();
        let twice = RunConfig::parse(&once.to_json())
            .unwrap()
            .normalized("y")
            .unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.sphere.unwrap().density.unwrap(), "1.85e3 kg/m^3");
    }
}
