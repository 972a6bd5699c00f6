use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use rotor_codes::molecular::{
    avg_momentum, build_molecular_code, check_operators, distortion, kicks_upto, kl_check, leakage_probability,
    leakage_sweep, solve_delta_for_leakage, LeakageResolution,
};
use rotor_codes::planar::{make_planar_code, run_round};
use rotor_codes::reps::{branch_report, classify_kicks, irrep_table};
use rotor_codes::rotations::{FiniteSubgroup, Rotation, SubgroupTag};
use rotor_codes::sphere::{
    build_sphere_code, check_operators_s2, combined_shift_witness, is_spherical_design, kl_check_sphere, point_set,
    SphereError, SphereFamily,
};
use rotor_codes::wigner::wigner_d;
use rotor_codes::Complex64;

use crate::args::*;
use crate::output::{to_value, Check, Report, Table};
use crate::CliError;

type Out = Result<Report, CliError>;

fn group(tag: &str) -> Result<FiniteSubgroup, CliError> {
    let t: SubgroupTag = tag.parse()?;
    Ok(FiniteSubgroup::new(t)?)
}

fn check(passed: bool, detail: impl Into<String>) -> Check {
    Check { passed, detail: detail.into() }
}

fn json_report(command: &'static str, params: serde_json::Value, result: serde_json::Value, check: Check) -> Report {
    Report { command, params, result, table: None, check, default_format: Format::Json }
}

pub fn run(cmd: &Command, seed: u64) -> Out {
    match cmd {
        Command::Tables(TablesCmd::Wigner(a)) => tables_wigner(a),
        Command::Code(CodeCmd::Branch(a)) => code_branch(a),
        Command::Code(CodeCmd::Classify(a)) => code_classify(a),
        Command::Planar(PlanarCmd::Demo(a)) => planar_demo(a, seed),
        Command::Mol(MolCmd::Code(a)) => match &a.action {
            MolCodeAction::Kl(k) => mol_kl(a, k, seed),
            MolCodeAction::Checks => mol_checks(a, seed),
        },
        Command::Mol(MolCmd::Sweep(SweepCmd::Pleak(a))) => sweep_pleak(a),
        Command::Mol(MolCmd::Sweep(SweepCmd::Distortion(a))) => sweep_distortion(a),
        Command::Mol(MolCmd::Solve(a)) => mol_solve(a),
        Command::Sphere(SphereCmd::Design(a)) => sphere_design(a),
        Command::Sphere(SphereCmd::Kl(a)) => sphere_kl(a),
        Command::Sphere(SphereCmd::Checks(a)) => sphere_checks(a),
    }
}

fn tables_wigner(a: &WignerArgs) -> Out {
    let [al, be, ga] = a.rotation;
    let r = Rotation::from_euler(al, be, ga);
    let d = wigner_d(a.ell, &r);
    let l = a.ell as i64;
    let matrix: Vec<Vec<[f64; 2]>> =
        (-l..=l).map(|m| (-l..=l).map(|n| d.get(m, n)).map(|z| [z.re, z.im]).collect()).collect();
    let defect = d.unitarity_defect();
    Ok(json_report(
        "tables wigner",
        to_value(a),
        json!({
            "ell": a.ell,
            "quaternion": r.quaternion(),
            "m_values": (-l..=l).collect::<Vec<_>>(),
            "matrix": matrix,
            "unitarity_defect": defect,
        }),
        check(defect < 1e-10, format!("unitarity defect {defect:e}")),
    ))
}

fn code_branch(a: &GroupPair) -> Out {
    let (k, h) = (irrep_table(&group(&a.k)?)?, irrep_table(&group(&a.h)?)?);
    let reports = (0..=a.lmax).map(|l| branch_report(l, &k, &h)).collect::<Result<Vec<_>, _>>()?;
    let ok = reports.iter().all(|r| r.dimensions_consistent(&k, &h));
    Ok(json_report(
        "code branch",
        to_value(a),
        to_value(&reports),
        check(ok, if ok { "dimensions consistent" } else { "dimension mismatch in branching" }),
    ))
}

fn code_classify(a: &GroupPair) -> Out {
    let verdicts = classify_kicks(&group(&a.h)?, &group(&a.k)?, a.lmax)?;
    Ok(json_report("code classify", to_value(a), to_value(&verdicts), check(true, "classification only")))
}

fn planar_demo(a: &PlanarArgs, seed: u64) -> Out {
    let code = make_planar_code(a.n, a.d, a.q * a.d * a.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Complex64> =
        (0..a.d).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let psi = code.logical_state(&coeffs)?;
    let trace = run_round(&code, &psi, a.error.shift, a.error.kick)?;
    let ok = trace.fidelity_after > 1.0 - 1e-12;
    let detail = format!("fidelity after recovery {}", trace.fidelity_after);
    Ok(json_report("planar demo", to_value(a), to_value(&trace), check(ok, detail)))
}

fn mol_kl(a: &MolCodeArgs, k: &KlArgs, seed: u64) -> Out {
    let code = build_molecular_code(a.h.parse()?, a.k.parse()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<Rotation> = (0..k.shifts)
        .map(|_| {
            let (_, axis) = Rotation::haar_random(&mut rng).to_axis_angle();
            Rotation::from_axis_angle(axis, rng.gen_range(0.0..=k.max_angle))
        })
        .collect::<Result<_, _>>()?;
    let report = kl_check(&code, &shifts, &kicks_upto(k.lmax));
    let ok = report.passed();
    let detail = format!("{} violations, largest {:e}", report.violations.len(), report.max_violation);
    let params = json!({ "H": a.h, "K": a.k, "kl": to_value(k), "seed": seed });
    let result = json!({ "code": to_value(&code.spec()), "report": to_value(&report) });
    Ok(json_report("mol code kl", params, result, check(ok, detail)))
}

fn mol_checks(a: &MolCodeArgs, seed: u64) -> Out {
    let code = build_molecular_code(a.h.parse()?, a.k.parse()?)?;
    let ops = check_operators(&code, seed)?;
    let ok = ops.certified();
    let params = json!({ "H": a.h, "K": a.k, "seed": seed });
    Ok(json_report("mol code checks", params, to_value(&ops), check(ok, "eigenvalues and defects")))
}

fn sweep_pleak(a: &SweepArgs) -> Out {
    let rows = leakage_sweep(a.n, &a.delta.0, LeakageResolution::default())?;
    let ok = rows.iter().all(|r| r.pleak_num.is_finite() && (0.0..=1.0).contains(&r.pleak_num));
    let table = Table {
        header: vec!["delta", "lbar_exact", "lbar_asym", "pleak_num", "pleak_asym"],
        rows: rows.iter().map(|r| vec![r.delta, r.lbar_exact, r.lbar_asym, r.pleak_num, r.pleak_asym]).collect(),
    };
    Ok(Report {
        command: "mol sweep pleak",
        params: to_value(a),
        result: to_value(&rows),
        table: Some(table),
        check: check(ok, "leakage probabilities in [0, 1]"),
        default_format: Format::Csv,
    })
}

fn sweep_distortion(a: &DistortionArgs) -> Out {
    let rows = a.delta.0.iter().map(|&d| distortion(a.n, d, a.ell)).collect::<Result<Vec<_>, _>>()?;
    let ok = rows.iter().all(|r| r.exact.is_finite());
    let table = Table {
        header: vec!["delta", "exact", "heuristic"],
        rows: rows.iter().map(|r| vec![r.delta, r.exact, r.heuristic]).collect(),
    };
    Ok(Report {
        command: "mol sweep distortion",
        params: to_value(a),
        result: to_value(&rows),
        table: Some(table),
        check: check(ok, "finite matrix elements"),
        default_format: Format::Csv,
    })
}

fn mol_solve(a: &SolveArgs) -> Out {
    let res = LeakageResolution::default();
    let delta = solve_delta_for_leakage(a.n, a.pleak, a.lo, a.hi, res)?;
    let leak = leakage_probability(a.n, delta, res)?;
    let stats = avg_momentum(delta, a.n)?;
    let rel = (leak.p_leak / a.pleak - 1.0).abs();
    let ok = rel < 1e-2 && leak.certificate.abs() < 1e-8;
    let detail = format!("relative miss {rel:e}, certificate {:e}", leak.certificate);
    Ok(json_report(
        "mol solve",
        to_value(a),
        json!({ "delta": delta, "leakage": to_value(&leak), "momentum": to_value(&stats) }),
        check(ok, detail),
    ))
}

fn sphere_design(a: &DesignArgs) -> Out {
    let pts = point_set(&a.points)?;
    let rep = is_spherical_design(&pts, a.l)?;
    let detail = format!("strength {} within L = {}", rep.strength, a.l);
    Ok(json_report("sphere design", to_value(a), to_value(&rep), check(rep.is_design, detail)))
}

fn sphere_kl(a: &SphereKlArgs) -> Out {
    let code = build_sphere_code(SphereFamily::Cyclic(a.n))?;
    let want = |e: SphereErrors| a.errors == e || a.errors == SphereErrors::All;
    let mut errors = Vec::new();
    if want(SphereErrors::Rotations) {
        errors.push(SphereError::Rotation(Rotation::about_z(0.3)));
        errors.push(SphereError::Rotation(Rotation::from_axis_angle([1.0, 0.0, 0.0], 0.2)?));
        errors.push(SphereError::Rotation(Rotation::from_axis_angle([0.2, 1.0, 0.1], 0.25)?));
    }
    let harmonics: Vec<(usize, i64)> =
        (0..=a.lmax).flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m))).collect();
    if want(SphereErrors::Kicks) {
        errors.extend(harmonics.iter().map(|&(ell, m)| SphereError::Harmonic { ell, m }));
    }
    let mut witnesses = Vec::new();
    if want(SphereErrors::Combined) {
        let about_anchor = Rotation::from_axis_angle(code.anchor().to_vec(), 0.2)?;
        for &(ell, m) in harmonics.iter().filter(|(l, _)| *l > 0) {
            errors.push(SphereError::Combined { rotation: about_anchor, ell, m });
            witnesses.push(combined_shift_witness(&code, &Rotation::from_euler(0.1, 0.2, 0.05), 0.3, ell, m)?);
        }
    }
    let report = kl_check_sphere(&code, &errors);
    let detail = format!("{} violations, largest {:e}", report.violations.len(), report.max_violation);
    Ok(json_report(
        "sphere kl",
        to_value(a),
        json!({ "report": to_value(&report), "combined_witnesses": to_value(&witnesses) }),
        check(report.passed(), detail),
    ))
}

fn sphere_checks(a: &SphereChecksArgs) -> Out {
    let family = a.n.map(SphereFamily::Cyclic).unwrap_or(SphereFamily::Tetrahedral);
    let rep = check_operators_s2(&build_sphere_code(family)?)?;
    let ok = rep.certified();
    Ok(json_report("sphere checks", to_value(a), to_value(&rep), check(ok, "check-operator eigenvalues")))
}
