use rhev_core::calibration::{calibrate_full, estimate_phase, CalibrationOptions, HarmonicProbe};
use rhev_core::experiments::{array_factor, compensation_weights, sweep_scenario, RmseReport};
use rhev_core::seed::derive_seed;
use rhev_core::units::{amplitude_to_db, power_to_db, wrap_phase};
use rhev_core::{add_noise, spectrum, synthesize_received, Method, ModulationSchedule, Result};

use crate::config::{ProbeSchedule, RunConfig};
use crate::output::{Chart, Series, Table};

/// Floor for dB columns when a power is exactly zero.
const DB_FLOOR: f64 = -300.0;

pub struct Artifact {
    pub name: &'static str,
    pub table: Table,
    pub chart: Chart,
    pub summary: Vec<String>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn options(cfg: &RunConfig) -> CalibrationOptions {
    CalibrationOptions {
        bits: cfg.calibration.bits,
        snr_db: cfg.calibration.snr_db,
        estimator: cfg.estimator(),
        amplitude_source: cfg.amplitude_source(),
        modulation_frequency: cfg.calibration.modulation_hz,
    }
}

pub fn sweep_delay(cfg: &RunConfig, seed: u64) -> Result<Artifact> {
    let aut = cfg.array(seed)?;
    let source = cfg.source()?;
    let sampling = cfg.sampling_config()?;
    let probe = HarmonicProbe {
        aut: &aut,
        source: &source,
        sampling: &sampling,
        snr_db: cfg.calibration.snr_db,
        modulation_frequency: cfg.calibration.modulation_hz,
    };
    let test = cfg.probe.channel - 1;
    let curve = probe.sweep(test, cfg.calibration.bits, derive_seed(seed, &[1]))?;

    let mut table = Table::new(&["k", "eta", "phase_deg", "power_linear", "power_db"]);
    let mut points = Vec::with_capacity(curve.len());
    for (k, p) in curve.powers().iter().enumerate() {
        let eta = curve.delay(k);
        let db = power_to_db(*p, DB_FLOOR);
        table.push(vec![
            k.to_string(),
            num(eta),
            num(360.0 * eta),
            num(*p),
            num(db),
        ]);
        points.push((360.0 * eta, db));
    }
    let mut summary = Vec::new();
    if let Ok(phase) = estimate_phase(&curve, cfg.estimator()) {
        summary.push(format!(
            "estimated phase difference (raw, before spatial correction): {:.4} deg",
            phase.to_degrees()
        ));
    }
    Ok(Artifact {
        name: "sweep-delay",
        table,
        chart: Chart {
            title: format!(
                "+1st harmonic power, channel {} vs reference",
                cfg.probe.channel
            ),
            x_label: "relative delay (deg of harmonic phase)".into(),
            y_label: "power (dB)".into(),
            y_floor: Some(-80.0),
            series: vec![Series {
                name: "power".into(),
                points,
            }],
        },
        summary,
    })
}

pub fn calibrate(cfg: &RunConfig, seed: u64) -> Result<Artifact> {
    let aut = cfg.array(seed)?;
    let result = calibrate_full(
        &aut,
        &cfg.source()?,
        &cfg.sampling_config()?,
        &options(cfg),
        derive_seed(seed, &[1]),
    )?;
    let truth = aut.true_imbalances();
    let mut table = Table::new(&[
        "channel",
        "preset_gamma_db",
        "est_gamma_db",
        "gamma_err_db",
        "preset_dphi_deg",
        "est_dphi_deg",
        "dphi_err_deg",
        "branch",
    ]);
    let (mut amp_pts, mut phase_pts) = (Vec::new(), Vec::new());
    for (est, t) in result.channels.iter().zip(&truth) {
        let pg = amplitude_to_db(t.amplitude_ratio);
        let eg = amplitude_to_db(est.amplitude_ratio);
        let perr = wrap_phase(est.phase_difference - t.phase_difference).to_degrees();
        let ch = est.channel + 1;
        table.push(vec![
            ch.to_string(),
            num(pg),
            num(eg),
            num(eg - pg),
            num(t.phase_difference.to_degrees()),
            num(est.phase_difference.to_degrees()),
            num(perr),
            est.branch.as_str().to_string(),
        ]);
        amp_pts.push((ch as f64, eg - pg));
        phase_pts.push((ch as f64, perr));
    }
    Ok(Artifact {
        name: "calibrate",
        table,
        chart: Chart {
            title: "calibration error per channel".into(),
            x_label: "channel".into(),
            y_label: "error (dB / deg)".into(),
            y_floor: None,
            series: vec![
                Series {
                    name: "amplitude error (dB)".into(),
                    points: amp_pts,
                },
                Series {
                    name: "phase error (deg)".into(),
                    points: phase_pts,
                },
            ],
        },
        summary: vec![format!(
            "{} harmonic power measurements",
            result.measurement_count
        )],
    })
}

fn sweep(cfg: &RunConfig, seed: u64, method: Option<Method>) -> Result<RmseReport> {
    let mut base = cfg.scenario()?;
    base.seed = seed;
    if let Some(m) = method {
        base.method = m;
    }
    sweep_scenario(&base, cfg.axis(), &cfg.sweep_values())
}

pub fn monte_carlo(cfg: &RunConfig, seed: u64) -> Result<Artifact> {
    let report = sweep(cfg, seed, None)?;
    let label = report.axis.label();
    let mut table = Table::new(&[
        "axis",
        "value",
        "rmse_ar",
        "rmse_pd_deg",
        "trials",
        "excluded",
    ]);
    let (mut ar, mut pd) = (Vec::new(), Vec::new());
    let mut summary = Vec::new();
    for (v, p) in report.values.iter().zip(&report.points) {
        let pd_deg = p.rmse_phase_difference.to_degrees();
        table.push(vec![
            label.to_string(),
            num(*v),
            num(p.rmse_amplitude_ratio),
            num(pd_deg),
            p.trials.to_string(),
            p.excluded.to_string(),
        ]);
        ar.push((*v, p.rmse_amplitude_ratio));
        pd.push((*v, pd_deg));
        if p.excluded > 0 {
            summary.push(format!("{label}={v}: {} trials excluded", p.excluded));
        }
    }
    Ok(Artifact {
        name: "monte-carlo",
        table,
        chart: Chart {
            title: "RMSE".into(),
            x_label: label.into(),
            y_label: "RMSE".into(),
            y_floor: None,
            series: vec![
                Series {
                    name: "amplitude ratio".into(),
                    points: ar,
                },
                Series {
                    name: "phase difference (deg)".into(),
                    points: pd,
                },
            ],
        },
        summary,
    })
}

pub fn compare_rev(cfg: &RunConfig, seed: u64) -> Result<Artifact> {
    let rhev = sweep(cfg, seed, Some(Method::Rhev))?;
    let rev = sweep(cfg, seed, Some(Method::Rev))?;
    let label = rhev.axis.label();
    let mut table = Table::new(&[
        "axis",
        "value",
        "rhev_rmse_ar",
        "rhev_rmse_pd_deg",
        "rev_rmse_ar",
        "rev_rmse_pd_deg",
        "trials",
    ]);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for ((v, p), q) in rhev.values.iter().zip(&rhev.points).zip(&rev.points) {
        let (pd_a, pd_b) = (
            p.rmse_phase_difference.to_degrees(),
            q.rmse_phase_difference.to_degrees(),
        );
        table.push(vec![
            label.to_string(),
            num(*v),
            num(p.rmse_amplitude_ratio),
            num(pd_a),
            num(q.rmse_amplitude_ratio),
            num(pd_b),
            cfg.experiment.trials.to_string(),
        ]);
        a.push((*v, pd_a));
        b.push((*v, pd_b));
    }
    Ok(Artifact {
        name: "compare-rev",
        table,
        chart: Chart {
            title: "phase-difference RMSE, RHEV vs REV".into(),
            x_label: label.into(),
            y_label: "RMSE (deg)".into(),
            y_floor: None,
            series: vec![
                Series {
                    name: "RHEV".into(),
                    points: a,
                },
                Series {
                    name: "REV".into(),
                    points: b,
                },
            ],
        },
        summary: Vec::new(),
    })
}

pub fn pattern(cfg: &RunConfig, seed: u64) -> Result<Artifact> {
    let aut = cfg.array(seed)?;
    let result = calibrate_full(
        &aut,
        &cfg.source()?,
        &cfg.sampling_config()?,
        &options(cfg),
        derive_seed(seed, &[1]),
    )?;
    let weights = compensation_weights(&result, cfg.pattern.quantize_bits)?;
    let n = cfg.pattern.points;
    let angles: Vec<f64> = (0..n)
        .map(|i| (-90.0 + 180.0 * i as f64 / (n - 1) as f64).to_radians())
        .collect();
    let r = array_factor(&aut, &weights, cfg.pattern.steer_deg.to_radians(), &angles)?;

    let mut table = Table::new(&["theta_deg", "before_db", "after_db", "ideal_db"]);
    for (i, a) in angles.iter().enumerate() {
        table.push(vec![
            num(a.to_degrees()),
            num(r.before_db[i]),
            num(r.after_db[i]),
            num(r.ideal_db[i]),
        ]);
    }
    let series = |name: &str, v: &[f64]| Series {
        name: name.into(),
        points: angles
            .iter()
            .map(|a| a.to_degrees())
            .zip(v.iter().copied())
            .collect(),
    };
    let sll = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2} dB"));
    Ok(Artifact {
        name: "pattern",
        chart: Chart {
            title: "normalized power pattern".into(),
            x_label: "angle (deg)".into(),
            y_label: "power (dB)".into(),
            y_floor: Some(-60.0),
            series: vec![
                series("before", &r.before_db),
                series("after", &r.after_db),
                series("ideal", &r.ideal_db),
            ],
        },
        table,
        summary: vec![
            format!("peak direction {:.3} deg", r.peak_direction.to_degrees()),
            format!("gain delta {:.3} dB", r.gain_delta_db),
            format!(
                "peak sidelobe before {}, after {}, ideal {}",
                sll(r.sll_before_db),
                sll(r.sll_after_db),
                sll(r.sll_ideal_db)
            ),
        ],
    })
}

pub fn spectrum_dump(cfg: &RunConfig, seed: u64) -> Result<Artifact> {
    let aut = cfg.array(seed)?;
    let source = cfg.source()?;
    let fp = cfg.calibration.modulation_hz;
    let test = cfg.probe.channel - 1;
    let schedule = match cfg.probe.schedule {
        ProbeSchedule::Single => ModulationSchedule::single_channel(&aut, test, fp)?,
        ProbeSchedule::Pair => ModulationSchedule::two_channel(&aut, test, cfg.probe.delay, fp)?,
    };
    let clean = synthesize_received(&aut, &source, &schedule, &cfg.sampling_config()?)?;
    let stream = add_noise(
        clean,
        cfg.calibration.snr_db,
        aut.reference_power() * source.power,
        derive_seed(seed, &[1]),
    );
    let mut table = Table::new(&["order", "freq_offset_hz", "power_linear", "power_db"]);
    let mut points = Vec::new();
    for h in spectrum(&stream) {
        let db = power_to_db(h.power, DB_FLOOR);
        let f = h.order as f64 * fp;
        table.push(vec![h.order.to_string(), num(f), num(h.power), num(db)]);
        points.push((h.order as f64, db));
    }
    Ok(Artifact {
        name: "spectrum",
        table,
        chart: Chart {
            title: "baseband spectrum".into(),
            x_label: "harmonic order".into(),
            y_label: "power (dB)".into(),
            y_floor: Some(-120.0),
            series: vec![Series {
                name: "power".into(),
                points,
            }],
        },
        summary: Vec::new(),
    })
}
