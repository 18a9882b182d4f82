use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use levkit_core::dynamics::{
    derive_seed, detect_impulses, estimate_psd, fit_lorentzian, matched_filter_threshold, simulate,
    MatchedFilter,
};
use levkit_core::limits::{
    axion_gw_line, coulomb_projection, dm_projection, isl_projection, millicharge_sensitivity,
    neutrality_sensitivity, ExclusionCurve,
};
use levkit_core::sensor::{acceleration_asd, in_nano_g, sql_force_asd, thermal_force_asd};
use levkit_core::CODATA_2018;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{Failure, Outcome};
use crate::output::{json, Sink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Case {
    Isl,
    Coulomb,
    Millicharge,
    Neutrality,
    Dm,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Isl => "isl",
            Case::Coulomb => "coulomb",
            Case::Millicharge => "millicharge",
            Case::Neutrality => "neutrality",
            Case::Dm => "dm",
        }
    }
}

/// What a command printed and which files it wrote.
#[derive(Debug, Default)]
pub struct Report {
    pub text: String,
    pub files: Vec<std::path::PathBuf>,
}

impl Report {
    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }
}

pub fn noise_budget(cfg: &RunConfig, sink: &Sink) -> Outcome<Report> {
    let sphere = cfg.sphere()?;
    let trap = cfg.trap()?;
    let noise = cfg.noise(&sphere, &trap)?;
    let freqs = cfg.frequencies()?;
    let sql = sql_force_asd(&sphere, &trap).value();

    let mut csv = sink.header_text();
    csv.push_str(
        "frequency_hz,force_asd_n_per_rthz,acceleration_asd_ng_per_rthz,sql_force_asd_n_per_rthz",
    );
    for c in noise.contributions() {
        let _ = write!(csv, ",{}_n_per_rthz", c.label);
    }
    csv.push('\n');
    let accel_ng =
        |f: f64| -> Outcome<f64> { Ok(in_nano_g(acceleration_asd(noise.total_asd(f), &sphere)?)?) };
    for &f in &freqs {
        let _ = write!(
            csv,
            "{f:e},{:e},{:e},{sql:e}",
            noise.total_asd(f).value(),
            accel_ng(f)?
        );
        for c in noise.contributions() {
            let _ = write!(csv, ",{:e}", c.spectrum.asd(f));
        }
        csv.push('\n');
    }

    let f0 = trap.resonant_frequency();
    let mut r = Report::default();
    r.line(format!("sphere_mass_kg: {:e}", sphere.mass()));
    r.line(format!(
        "thermal_force_asd_n_per_rthz: {:e}",
        thermal_force_asd(&sphere, &trap).value()
    ));
    r.line(format!("sql_force_asd_n_per_rthz: {sql:e}"));
    r.line(format!(
        "force_asd_at_f0_n_per_rthz: {:e}",
        noise.total_asd(f0).value()
    ));
    r.line(format!(
        "acceleration_asd_at_f0_ng_per_rthz: {:e}",
        accel_ng(f0)?
    ));
    r.files.push(sink.write("noise_budget.csv", &csv)?);
    Ok(r)
}

pub fn simulate_cmd(cfg: &RunConfig, sink: &Sink) -> Outcome<Report> {
    let sphere = cfg.sphere()?;
    let trap = cfg.trap()?;
    let sim = cfg.simulation(&trap)?;
    let impulses = cfg.impulses()?;
    let (lo, hi) = cfg.fit_band(&trap)?;
    let series = simulate(&sphere, &trap, &sim, &impulses)?;

    let stride = cfg.trajectory_stride();
    let mut traj = String::with_capacity(series.len() / stride * 32 + 1024);
    traj.push_str(&sink.header_text());
    traj.push_str("time_s,displacement_m\n");
    for i in (0..series.len()).step_by(stride) {
        let _ = writeln!(traj, "{:e},{:e}", series.time(i), series.samples[i]);
    }

    let psd = estimate_psd(&series, cfg.psd_segment())?;
    let fit = fit_lorentzian(&psd, lo, hi)?;
    let m = sphere.mass();
    let w0 = trap.angular_frequency();
    let configured = sim.effective_temperature();
    let measured = series.mean_square() * m * w0 * w0 / CODATA_2018.k_b;

    let mut r = Report::default();
    r.files.push(sink.write("trajectory.csv", &traj)?);
    r.files
        .push(sink.write("psd.csv", &psd.to_csv(sink.header()))?);
    if !impulses.is_empty() {
        let rate = cfg.simulation_false_alarm_rate()?.ok_or_else(|| {
            Failure::config("simulation.false_alarm_rate: required when impulses are configured")
        })?;
        let mut quiet = sim.clone();
        quiet.rng_seed = derive_seed(sim.rng_seed, 1);
        let threshold = matched_filter_threshold(&sphere, &trap, &quiet, rate)?;
        let gamma = sim.effective_damping(&trap);
        let filter = MatchedFilter::for_trap(&sphere, &trap, gamma, series.sample_interval)?;
        let output = filter.apply(&series.samples);
        let found = detect_impulses(
            &output,
            threshold.q_min,
            filter.len(),
            series.sample_interval,
            series.start_time,
        );
        // a kick shows up within one template length of its injection time
        let span = filter.len() as f64 * series.sample_interval;
        let recovered = impulses
            .iter()
            .filter(|ev| found.iter().any(|d| (d.time - ev.time).abs() <= span))
            .count();
        let expected_false = rate * series.len() as f64 * series.sample_interval;
        r.line(format!("threshold_q_min_kg_m_per_s: {:e}", threshold.q_min));
        r.line(format!("detections: {}", found.len()));
        r.line(format!("recovered: {recovered} of {}", impulses.len()));
        r.line(format!("expected_false_alarms: {expected_false:e}"));
        let doc = json!({
            "provenance": header_value(sink),
            "threshold": threshold,
            "threshold_seed": quiet.rng_seed,
            "injected": impulses,
            "detections": found,
            "recovered": recovered,
            "expected_false_alarms": expected_false,
        });
        r.files.push(sink.write("detections.json", &json(&doc))?);
    }
    let summary = json!({
        "provenance": header_value(sink),
        "samples": series.len(),
        "sample_interval_s": series.sample_interval,
        "effective_damping_per_s": sim.effective_damping(&trap),
        "configured_effective_temperature_k": configured,
        "measured_effective_temperature_k": measured,
        "fit": fit,
        "fit_band_hz": [lo, hi],
        "fitted_force_asd_n_per_rthz": fit.force_asd(m),
        "thermal_force_asd_n_per_rthz": thermal_force_asd(&sphere, &trap).value(),
    });
    r.files.push(sink.write("summary.json", &json(&summary))?);
    r.line(format!(
        "configured_effective_temperature_k: {configured:e}"
    ));
    r.line(format!("measured_effective_temperature_k: {measured:e}"));
    r.line(format!(
        "fit_resonant_frequency_hz: {:e}",
        fit.resonant_frequency
    ));
    r.line(format!("fit_damping_rate_per_s: {:e}", fit.damping_rate));
    r.line(format!(
        "fitted_force_asd_n_per_rthz: {:e}",
        fit.force_asd(m)
    ));
    Ok(r)
}

fn header_value(sink: &Sink) -> Value {
    let mut map = serde_json::Map::new();
    for (k, v) in sink.header() {
        let value = if k == "config" {
            serde_json::from_str(v).unwrap_or(Value::from(v.as_str()))
        } else {
            Value::from(v.as_str())
        };
        map.insert(k.clone(), value);
    }
    Value::Object(map)
}

fn write_curve(curve: ExclusionCurve, sink: &Sink, suffix: &str, r: &mut Report) -> Outcome<()> {
    let curve = curve.with_input("run", header_value(sink));
    r.files.push(sink.write(
        &format!("{suffix}.csv"),
        &(sink.header_text() + &curve.to_csv()),
    )?);
    r.files
        .push(sink.write(&format!("{suffix}.json"), &(curve.to_json() + "\n"))?);
    r.line(format!("points: {}", curve.points.len()));
    if !curve.omitted.is_empty() {
        r.line(format!("omitted: {}", curve.omitted.len()));
    }
    if !curve.censored.is_empty() {
        r.line(format!("censored: {}", curve.censored.len()));
    }
    if let Some(best) = curve
        .points
        .iter()
        .min_by(|a, b| a.coupling.total_cmp(&b.coupling))
    {
        r.line(format!(
            "best_{}: {:e} at {} = {:e}",
            curve.coupling,
            best.coupling,
            curve.abscissa.column(),
            best.abscissa
        ));
    }
    Ok(())
}

pub fn exclusion(cfg: &RunConfig, case: Case, sink: &Sink) -> Outcome<Report> {
    let plan = cfg.plan()?;
    let mut r = Report::default();
    match case {
        Case::Isl => {
            if plan.geometry.is_none() {
                return Err(Failure::config(
                    "geometry: missing required section for the isl case",
                ));
            }
            let curve = isl_projection(&plan, &cfg.ranges()?)?;
            write_curve(curve, sink, "isl", &mut r)?;
        }
        Case::Coulomb => {
            if plan.capacitor.is_none() {
                return Err(Failure::config(
                    "plan.capacitor: missing required key for the coulomb case",
                ));
            }
            let curve = coulomb_projection(&plan, &cfg.ranges()?)?;
            write_curve(curve, sink, "coulomb", &mut r)?;
        }
        Case::Millicharge | Case::Neutrality => {
            let field = cfg.field()?;
            let eps = millicharge_sensitivity(&plan, field)?;
            let neutral = neutrality_sensitivity(&plan, field)?;
            r.line(format!("millicharge_sensitivity_e: {eps:e}"));
            r.line(format!("neutrality_bound_e: {neutral:e}"));
            let mut csv = sink.header_text();
            csv.push_str("quantity,value,unit\n");
            let _ = writeln!(csv, "force_floor,{:e},N", plan.force_floor()?);
            let _ = writeln!(csv, "field,{field:e},V/m");
            let _ = writeln!(csv, "nucleons,{:e},1", plan.sphere.nucleon_count());
            let _ = writeln!(csv, "millicharge_sensitivity,{eps:e},e");
            let _ = writeln!(csv, "neutrality_bound,{neutral:e},e");
            let doc = json!({
                "provenance": header_value(sink),
                "force_floor_n": plan.force_floor()?,
                "field_v_per_m": field,
                "nucleons": plan.sphere.nucleon_count(),
                "millicharge_sensitivity_e": eps,
                "neutrality_bound_e": neutral,
            });
            let name = case.name();
            r.files.push(sink.write(&format!("{name}.csv"), &csv)?);
            r.files
                .push(sink.write(&format!("{name}.json"), &json(&doc))?);
        }
        Case::Dm => {
            let dm = cfg.dm()?;
            let halo = cfg.halo()?;
            let (q_min, seed, threshold) = match dm.q_min {
                Some(q) => (q, None, Value::Null),
                None => {
                    let rate = dm.false_alarm_rate.ok_or_else(|| {
                        Failure::config(
                            "plan.dm: give q_min, or false_alarm_rate plus a simulation section",
                        )
                    })?;
                    let sim = cfg.simulation(&plan.trap)?;
                    let th = matched_filter_threshold(&plan.sphere, &plan.trap, &sim, rate)?;
                    (
                        th.q_min,
                        Some(sim.rng_seed),
                        serde_json::to_value(&th).expect("serialises"),
                    )
                }
            };
            r.line(format!("q_min_kg_m_per_s: {q_min:e}"));
            r.line(format!("exposure_sphere_s: {:e}", plan.exposure()));
            let mut curve = dm_projection(&plan, &halo, &dm.masses_ev, dm.mediator_range, q_min)?;
            if let Some(seed) = seed {
                curve = curve.with_seed(seed).with_input("threshold", threshold);
            }
            write_curve(curve, sink, "dm", &mut r)?;
        }
    }
    Ok(r)
}

pub fn axion(decay_constants_gev: &[f64], output: Option<&Path>, command: &str) -> Outcome<Report> {
    if decay_constants_gev.is_empty() {
        return Err(Failure::config("axion: give at least one decay constant"));
    }
    let mut r = Report::default();
    let mut csv = format!("# levkit: {}\n# command: {command}\n", levkit_core::VERSION);
    csv.push_str("decay_constant_gev,mass_ev,gw_frequency_hz\n");
    for &fa in decay_constants_gev {
        if !(fa.is_finite() && fa > 0.0) {
            return Err(Failure::config(format!(
                "axion: decay constant must be positive, got {fa}"
            )));
        }
        let line = axion_gw_line(fa)?;
        let row = format!(
            "{:e},{:e},{:e}",
            line.decay_constant_gev, line.mass_ev, line.gw_frequency_hz
        );
        csv.push_str(&row);
        csv.push('\n');
        r.line(row);
    }
    r.text = format!("decay_constant_gev,mass_ev,gw_frequency_hz\n{}", r.text);
    if let Some(path) = output {
        crate::output::write_atomic(path, &csv)?;
        r.files.push(path.to_path_buf());
    }
    Ok(r)
}
