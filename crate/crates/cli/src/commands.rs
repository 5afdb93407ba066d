//! Subcommand bodies. Each returns the full output text.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use mixed_cournot::bifurcation::{ns_boundary_with, stability_loss_with, AlphaScan, AngleScan};
use mixed_cournot::dynamics::{
    bifurcation_diagram, diagram_row, largest_lyapunov_with, perturbed_start, phase_portrait, AttractorType,
    DiagramRow, InitialPolicy, SweepSpec,
};
use mixed_cournot::model::economic_report;
use mixed_cournot::spectral::{no_public_firm_poly, poly_roots};
use mixed_cournot::{
    boundary_equilibrium, check_assumptions, epsilon_triple, flip_boundary, full_char_poly, positive_equilibrium,
    reduced_char_poly, reduced_fixed_point, simulate, stability_region, EquilibriumChoice, MarketParams, ParityCase,
};

use crate::config::{RunConfig, SpectrumWhich};
use crate::Failure;

/// Fixed 17-significant-digit scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_header(cfg: &RunConfig, columns: &str) -> String {
    let mut s = String::new();
    for (k, v) in cfg.echoed() {
        let _ = writeln!(s, "# {k}={v}");
    }
    s.push_str(columns);
    s.push('\n');
    s
}

fn json_doc(cfg: &RunConfig, body: Value) -> String {
    let config: Map<String, Value> = cfg
        .echoed()
        .into_iter()
        .map(|(k, v)| (k.to_string(), Value::String(v)))
        .collect();
    let mut doc = Map::new();
    doc.insert("config".into(), Value::Object(config));
    if let Value::Object(fields) = body {
        doc.extend(fields);
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("values are finite or null");
    s.push('\n');
    s
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn execute(name: &str, cfg: &RunConfig) -> Result<String, Failure> {
    match name {
        "equilibria" => equilibria(cfg),
        "simulate" => simulate_cmd(cfg),
        "spectrum" => spectrum(cfg),
        "stability-region" => region(cfg),
        "flip-boundary" => flip(cfg),
        "ns-curve" => ns_curve(cfg),
        "critical-alpha" => critical(cfg),
        "bifurcation-diagram" => diagram(cfg),
        "lyapunov" => lyapunov(cfg),
        "phase-portrait" => portrait(cfg),
        other => Err(Failure::Invalid(format!("unknown subcommand `{other}`"))),
    }
}

fn with_alpha(cfg: &RunConfig) -> Result<MarketParams, Failure> {
    let alpha = cfg.alpha()?;
    Ok(cfg.market()?.with_alpha(alpha)?)
}

fn equilibria(cfg: &RunConfig) -> Result<String, Failure> {
    let p = cfg.market()?;
    let r = check_assumptions(&p);
    let e0 = boundary_equilibrium(&p);
    let mut body = json!({
        "assumptions": {
            "a1_holds": r.a1_holds,
            "a1_margin": r.a1_margin,
            "a2_holds": r.a2_holds,
            "a2_margin": r.a2_margin,
        },
        "boundary": {
            "q_star": e0.point[1],
            "point": e0.point.0,
            "residual": e0.residual,
        },
    });
    let economics = p.primitives().is_some();
    match positive_equilibrium(&p) {
        Ok(e) => {
            body["positive"] = json!({
                "q0_star": e.point[0],
                "q1_star": e.point[1],
                "point": e.point.0,
                "residual": e.residual,
            });
            if economics {
                body["positive"]["economics"] = serde_json::to_value(economic_report(&e.point, &p)?).unwrap();
            }
        }
        Err(err) => {
            body["positive"] = Value::Null;
            body["positive_error"] = json!(err.to_string());
        }
    }
    if economics {
        body["boundary"]["economics"] = serde_json::to_value(economic_report(&e0.point, &p)?).unwrap();
    }
    if p.n() >= 2 {
        let e = reduced_fixed_point(&p)?;
        body["no_public_firm"] = json!({ "point": e.point.0, "residual": e.residual });
    }
    Ok(json_doc(cfg, body))
}

fn simulate_cmd(cfg: &RunConfig) -> Result<String, Failure> {
    let p = with_alpha(cfg)?;
    let d = cfg.delays();
    let init = perturbed_start(&p, &d, cfg.perturbation)?;
    let traj = simulate(&p, &d, &init, cfg.steps, cfg.blowup)?;
    let columns: Vec<String> = std::iter::once("t".to_string())
        .chain((0..p.firms()).map(|i| format!("q{i}")))
        .collect();
    let mut s = csv_header(cfg, &columns.join(","));
    for (i, q) in traj.states.iter().enumerate() {
        let _ = write!(s, "{}", traj.start + i as i64);
        for x in q.iter() {
            let _ = write!(s, ",{}", num(*x));
        }
        s.push('\n');
    }
    if traj.diverged {
        s.push_str("# diverged=true\n");
    }
    Ok(s)
}

fn spectrum(cfg: &RunConfig) -> Result<String, Failure> {
    let d = cfg.delays();
    let (p, cp) = match cfg.which {
        SpectrumWhich::NoPublicFirm => {
            let p = cfg.market()?;
            let cp = no_public_firm_poly(&p, d.tau2)?;
            (p, cp)
        }
        SpectrumWhich::Full => {
            let p = with_alpha(cfg)?;
            let cp = full_char_poly(&p, &d, EquilibriumChoice::Positive)?;
            (p, cp)
        }
        SpectrumWhich::Boundary => {
            let p = with_alpha(cfg)?;
            let cp = full_char_poly(&p, &d, EquilibriumChoice::Boundary)?;
            (p, cp)
        }
        SpectrumWhich::Reduced => {
            let p = with_alpha(cfg)?;
            check_assumptions(&p).require()?;
            let cp = reduced_char_poly(&epsilon_triple(&p), &d);
            (p, cp)
        }
    };
    let report = poly_roots(&cp)?;
    let mut roots: Vec<Complex64> = report.roots.clone();
    roots.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.im.total_cmp(&a.im))
            .then(b.re.total_cmp(&a.re))
    });
    let eps = epsilon_triple(&p);
    let body = json!({
        "which": cfg.which.as_str(),
        "degree": cp.degree(),
        "classification": format!("{:?}", report.classification),
        "max_modulus": report.max_modulus,
        "max_nonzero_modulus": report.max_nonzero_modulus,
        "on_circle_count": report.on_circle_count,
        "epsilon": { "eps0": eps.eps0, "eps1": eps.eps1, "eps2": eps.eps2 },
        "coefficients": cp.coefficients(),
        "roots": roots
            .iter()
            .map(|z| json!({ "re": z.re, "im": z.im, "modulus": z.norm() }))
            .collect::<Vec<_>>(),
    });
    Ok(json_doc(cfg, body))
}

fn region(cfg: &RunConfig) -> Result<String, Failure> {
    let p = cfg.market()?;
    let rows = stability_region(&p, p.n(), &cfg.delta_grid());
    let mut s = csv_header(cfg, "delta,alpha_max,feasible");
    for r in rows {
        let a = r.alpha_max.map(num).unwrap_or_default();
        let _ = writeln!(s, "{},{},{}", num(r.delta), a, r.feasible);
    }
    Ok(s)
}

fn point_json(b: &mixed_cournot::BifurcationPoint) -> Value {
    json!({
        "alpha": b.alpha,
        "kind": format!("{:?}", b.kind),
        "theta": b.theta,
        "eps1": b.eps1,
        "residual": b.residual,
    })
}

fn flip(cfg: &RunConfig) -> Result<String, Failure> {
    let p = cfg.market()?;
    let d = cfg.delays();
    let case = ParityCase::of(&d);
    let b = flip_boundary(&p, &d)?;
    let mut body = point_json(&b);
    body["parity_case"] = json!(case.case_number());
    body["sum_even"] = json!(case.sum_even);
    body["tau2_even"] = json!(case.tau2_even);
    Ok(json_doc(cfg, body))
}

fn ns_curve(cfg: &RunConfig) -> Result<String, Failure> {
    let p = cfg.market()?;
    let scan = AngleScan {
        points: cfg.theta_points,
        ..AngleScan::default()
    };
    let pts = ns_boundary_with(&p, &cfg.delays(), &scan)?;
    let mut s = csv_header(cfg, "theta,eps1,alpha,residual");
    for b in pts {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            num(b.theta),
            num(b.eps1),
            num(b.alpha),
            num(b.residual)
        );
    }
    Ok(s)
}

fn critical(cfg: &RunConfig) -> Result<String, Failure> {
    let p = cfg.market()?;
    let (lo, hi) = cfg.alpha_range()?;
    let scan = AlphaScan {
        points: cfg.alpha_points,
        ..AlphaScan::new(lo, hi)
    };
    let loss = stability_loss_with(&p, &cfg.delays(), &scan)?;
    let mut body = point_json(&loss.detected);
    body["delay_free_alpha"] = loss.delay_free_alpha.map(finite).unwrap_or(Value::Null);
    body["flip_candidate"] = loss.flip_candidate.as_ref().map(point_json).unwrap_or(Value::Null);
    body["flip_is_first"] = json!(loss.flip_is_first);
    Ok(json_doc(cfg, body))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Invalid(format!("cannot start {workers} workers: {e}")))
}

fn sweep_rows(p: &MarketParams, cfg: &RunConfig, spec: &SweepSpec) -> Result<Vec<DiagramRow>, Failure> {
    let d = cfg.delays();
    spec.validate()?;
    if spec.policy == InitialPolicy::Continued {
        return Ok(bifurcation_diagram(p, &d, spec)?);
    }
    let alphas = spec.alphas();
    let cells: Vec<Result<DiagramRow, Failure>> = pool(cfg.workers)?.install(|| {
        alphas
            .par_iter()
            .map(|&alpha| {
                let at = p.with_alpha(alpha)?;
                let init = perturbed_start(&at, &d, spec.perturbation)?;
                Ok(diagram_row(p, &d, alpha, spec, &init)?.0)
            })
            .collect()
    });
    cells.into_iter().collect()
}

fn diagram(cfg: &RunConfig) -> Result<String, Failure> {
    let p = cfg.market()?;
    let spec = cfg.sweep()?;
    let rows = sweep_rows(&p, cfg, &spec)?;
    let mut s = csv_header(cfg, "alpha,sample_index,q0,lle,attractor_type");
    for row in rows {
        let kind = row.attractor.kind;
        if kind == AttractorType::Divergent {
            let _ = writeln!(s, "{},0,,,{}", num(row.alpha), kind);
            continue;
        }
        let lle = row.lle.map(num).unwrap_or_default();
        for (i, q0) in row.attractor.samples.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{},{}", num(row.alpha), i, num(*q0), lle, kind);
        }
    }
    Ok(s)
}

fn lyapunov(cfg: &RunConfig) -> Result<String, Failure> {
    let p = with_alpha(cfg)?;
    let d = cfg.delays();
    let init = perturbed_start(&p, &d, cfg.perturbation)?;
    let est = largest_lyapunov_with(
        &p,
        &d,
        &init,
        cfg.lle_iterations,
        cfg.lle_transient,
        cfg.renormalization,
        cfg.blowup,
    )?;
    let body = json!({
        "lle": est.lle,
        "transient": est.transient,
        "iterations": est.iterations,
        "renormalization": est.renormalization,
    });
    Ok(json_doc(cfg, body))
}

fn portrait(cfg: &RunConfig) -> Result<String, Failure> {
    let alpha = cfg.alpha()?;
    let p = cfg.market()?;
    let spec = SweepSpec {
        transient: cfg.transient,
        samples: cfg.samples,
        perturbation: cfg.perturbation,
        blowup: cfg.blowup,
        ..SweepSpec::new(0.0, 1.0, 2)
    };
    let pp = phase_portrait(&p, &cfg.delays(), alpha, &spec)?;
    let mut s = csv_header(cfg, "t,q0,q1");
    for pt in &pp.points {
        let _ = writeln!(s, "{},{},{}", pt.t, num(pt.q0), num(pt.q1));
    }
    if pp.diverged {
        s.push_str("# diverged=true\n");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Origin};

    fn section4() -> RunConfig {
        parse_config("n=4\ndelta=0.4\nalpha=1.0\na0=2\na1=2.5\nb=1\n")
            .unwrap()
            .config
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.9375), "9.3750000000000000e-1");
        assert_eq!(num(-0.125), "-1.2500000000000000e-1");
    }

    #[test]
    fn equilibria_json() {
        let out = execute("equilibria", &section4()).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["positive"]["q0_star"].as_f64(), Some(0.9375));
        assert_eq!(v["positive"]["q1_star"].as_f64(), Some(0.6640625));
        assert_eq!(v["config"]["n"], "4");
    }

    #[test]
    fn boundary_spectrum_needs_a1() {
        let mut c = section4();
        c.set("a0", "1", Origin::Flag).unwrap();
        c.set("which", "boundary", Origin::Flag).unwrap();
        let e = execute("spectrum", &c).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("A.1"));
    }

    #[test]
    fn critical_errors_are_numerical() {
        let mut c = section4();
        for (k, v) in [
            ("tau0", "5"),
            ("tau1", "3"),
            ("tau2", "3"),
            ("alpha_min", "1.0"),
            ("alpha_max", "1.2"),
        ] {
            c.set(k, v, Origin::Flag).unwrap();
        }
        assert_eq!(execute("critical-alpha", &c).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn region_csv() {
        let mut c = section4();
        c.set("delta_min", "0.4", Origin::Flag).unwrap();
        c.set("delta_points", "1", Origin::Flag).unwrap();
        let out = execute("stability-region", &c).unwrap();
        let last = out.lines().last().unwrap();
        assert!(last.starts_with("4.0000000000000002e-1,1.18518518518518"), "{last}");
        assert!(last.ends_with(",true"));
    }
}
