//! One function per subcommand. Each reads its sections, runs the library
//! and writes CSV/JSON (and binary fields) into the output directory.

use calderon_core::cgo::{cgo_solve, CgoPhase};
use calderon_core::conjugate::{carleman_constant_scan, log_spaced_grid, ScanOptions};
use calderon_core::dtn::{dtn_distance, dtn_map};
use calderon_core::io::{encode_dtn, encode_field};
use calderon_core::reconstruct::{stability_report, uniqueness_check, ReconstructionConfig};
use calderon_core::{FrequencyConvention, PointSet};
use serde_json::json;

use crate::config::Config;
use crate::output::{num, opt, OutDir, Table};
use crate::setup::{domain, potential, potential_or_zero, setup};
use crate::CliError;

pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub out: &'a mut OutDir,
    pub verbose: bool,
}

impl Ctx<'_> {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn grid(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let s = setup(ctx.cfg)?;
    let dirs = s.sigma.directions();
    let full = s.lattice.full();
    let interior = full.interior(dirs);
    let double = interior.interior(dirs);
    let boundary = full.boundary(dirs);
    let mut table = Table::new(s.provenance(), &["set", "count"]);
    for (name, set) in [("full", &full), ("interior", &interior), ("double_interior", &double), ("boundary", &boundary)] {
        table.push(0.0, vec![name.into(), set.len().to_string()]);
    }
    ctx.out.write_csv("grid.csv", &table)?;
    ctx.out.write_json(
        "grid.json",
        &json!({
            "d": s.lattice.dim(),
            "n": s.lattice.n(),
            "h": s.lattice.h(),
            "full": full.len(),
            "interior": interior.len(),
            "double_interior": double.len(),
            "boundary": boundary.len(),
        }),
    )
}

pub fn sigma(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let s = setup(ctx.cfg)?;
    let d = s.lattice.dim();
    let mut cols: Vec<String> = vec!["direction".into()];
    cols.extend((0..d).map(|i| format!("y{i}")));
    cols.push("weight".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new(s.provenance(), &col_refs);
    for (i, f) in s.sigma.fields().iter().enumerate() {
        for (p, v) in f.values().iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(f.domain().position(p).into_iter().map(num));
            row.push(num(*v));
            table.push(0.0, row);
        }
    }
    ctx.out.write_csv("sigma.csv", &table)?;
    let m = s.sigma.metrics();
    ctx.out.write_json(
        "sigma.json",
        &json!({
            "kind": s.kind,
            "h": s.lattice.h(),
            "directions": s.sigma.directions().len(),
            "eps_a": m.eps_a,
            "eps_d": m.eps_d,
            "m_bound": m.m_bound,
            "uniform": s.sigma.is_uniform(),
        }),
    )
}

pub fn dtn(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let s = setup(ctx.cfg)?;
    let dom = domain(ctx.cfg, &s)?;
    let q1 = potential_or_zero(ctx.cfg, "potential", &s, &dom)?;
    ctx.note(format!("assembling DtN map on {} boundary nodes", dom.w.boundary(s.sigma.directions()).len()));
    let l1 = dtn_map(&q1, &s.sigma)?;
    ctx.out.write_bytes("dtn.bin", &encode_dtn(&l1.boundary_nodes, &l1.matrix))?;
    ctx.out.write_bytes("potential.calf", &encode_field(q1.q()))?;
    let mut lambda = None;
    if let Some(q2) = potential(ctx.cfg, "potential2", &s, &dom)? {
        let l2 = dtn_map(&q2, &s.sigma)?;
        ctx.out.write_bytes("dtn2.bin", &encode_dtn(&l2.boundary_nodes, &l2.matrix))?;
        ctx.out.write_bytes("potential2.calf", &encode_field(q2.q()))?;
        lambda = Some(dtn_distance(&l1, &l2, &s.sigma)?);
    }
    let mut table = Table::new(
        s.provenance(),
        &["boundary_nodes", "asymmetry", "max_residual", "lambda", "lambda_lower", "lambda_upper"],
    );
    table.push(
        0.0,
        vec![
            l1.boundary_nodes.len().to_string(),
            num(l1.asymmetry()),
            num(l1.max_residual),
            opt(lambda.map(|b| b.surrogate)),
            opt(lambda.map(|b| b.lower)),
            opt(lambda.map(|b| b.upper)),
        ],
    );
    ctx.out.write_csv("dtn.csv", &table)?;
    ctx.out.write_json(
        "dtn.json",
        &json!({
            "boundary_nodes": l1.boundary_nodes.len(),
            "asymmetry": l1.asymmetry(),
            "max_residual": l1.max_residual,
            "q_hash": l1.q_hash,
            "kernel_margin": q1.kernel_margin(),
            "lambda": lambda,
        }),
    )
}

pub fn carleman_scan(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let s = setup(ctx.cfg)?;
    let sec = ctx.cfg.section("scan")?;
    let d = s.lattice.dim();
    let n = s.lattice.n() as i64;
    let dir = sec.f64_list_opt("direction")?.unwrap_or_else(|| vec![1.0; d]);
    if dir.len() != d || dir.iter().all(|&v| v == 0.0) {
        return Err(CliError::Validation(format!("key `scan.direction` needs {d} entries, not all zero")));
    }
    let s_min = sec.f64_or("s_min", 4.0)?;
    let s_max = sec.f64_or("s_max", 0.3 * s.lattice.h().powf(-2.0 / 3.0))?;
    let count = sec.usize_or("count", 5)?;
    if count == 0 || !(s_min > 0.0 && s_max > 0.0) {
        return Err(CliError::Validation("keys `scan.count`, `scan.s_min`, `scan.s_max` must be positive".into()));
    }
    let defaults = ScanOptions::default();
    let opts = ScanOptions {
        dense_limit: sec.usize_or("dense_limit", defaults.dense_limit)?,
        tol: sec.f64_or("tol", defaults.tol)?,
        commutator: sec.bool_or("commutator", defaults.commutator)?,
        l2_only: sec.bool_or("l2_only", defaults.l2_only)?,
    };
    let margin = sec.usize_or("margin", 2)? as i64;
    let b = PointSet::index_box(s.lattice, &vec![margin; d], &vec![n - 1 - margin; d])?;
    let grid = log_spaced_grid(&dir, s_min, s_max, count);
    ctx.note(format!("scanning {count} weights on |B| = {}", b.len()));
    let rows = carleman_constant_scan(&s.sigma, &b, &grid, &opts)?;
    let mut table = Table::new(
        s.provenance(),
        &["ratio_min", "ratio_sum_lower", "l2_only_ratio", "commutator_ratio"],
    );
    for r in &rows {
        table.push(
            r.s_norm,
            vec![num(r.ratio_min), num(r.ratio_sum_lower), opt(r.l2_only_ratio), opt(r.commutator_ratio)],
        );
    }
    ctx.out.write_csv("scan.csv", &table)
}

pub fn cgo(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let s = setup(ctx.cfg)?;
    let dom = domain(ctx.cfg, &s)?;
    let q = potential_or_zero(ctx.cfg, "potential", &s, &dom)?;
    let sec = ctx.cfg.section("cgo")?;
    let d = s.lattice.dim();
    let s_values = sec.f64_list("s")?;
    let real_axis = sec.usize_or("real_axis", 0)?;
    let imag_axis = sec.usize_or("imag_axis", 1)?;
    if real_axis >= d || imag_axis >= d || real_axis == imag_axis {
        return Err(CliError::Validation("keys `cgo.real_axis` and `cgo.imag_axis` must be distinct axes".into()));
    }
    let mut table = Table::new(
        s.provenance(),
        &["r_l2", "scaled_r_l2", "r_h1_semi", "residual", "aux_residual", "identity_gap", "sigma_min", "envelope", "warnings"],
    );
    let mut last = None;
    for &t in &s_values {
        let mut re = vec![0.0; d];
        let mut im = vec![0.0; d];
        re[real_axis] = t;
        im[imag_axis] = t;
        let phase = CgoPhase::from_parts(&re, &im)?;
        ctx.note(format!("CGO solve at |s| = {t}"));
        let sol = cgo_solve(&q, &phase, &s.sigma, &dom)?;
        let g = &sol.diagnostics;
        table.push(
            g.s_norm,
            vec![
                num(g.r_l2),
                num(g.s_norm * g.r_l2),
                num(g.r_h1_semi),
                num(g.residual),
                num(g.aux_residual),
                num(sol.identity_gap()),
                num(g.sigma_min),
                num(g.envelope),
                g.warnings.join("; "),
            ],
        );
        last = Some(sol);
    }
    ctx.out.write_csv("cgo.csv", &table)?;
    ctx.out.write_bytes("potential.calf", &encode_field(q.q()))?;
    if let Some(sol) = last {
        ctx.out.write_bytes("r_tilde.calf", &encode_field(&sol.r_tilde))?;
    }
    Ok(())
}

fn reconstruction_config(cfg: &Config) -> Result<ReconstructionConfig, CliError> {
    let defaults = ReconstructionConfig::default();
    let Some(sec) = cfg.optional_section("reconstruct")? else {
        return Ok(defaults);
    };
    let convention = match sec.str_or("frequency_convention", "literal")? {
        "literal" => FrequencyConvention::Literal,
        "symmetric" => FrequencyConvention::Symmetric,
        other => {
            return Err(CliError::Validation(format!(
                "key `reconstruct.frequency_convention` must be literal or symmetric, got {other:?}"
            )))
        }
    };
    Ok(ReconstructionConfig {
        m: sec.f64_or("m", defaults.m)?,
        s0: sec.f64_opt("s0")?,
        c_const: sec.f64_or("c_const", defaults.c_const)?,
        r: sec.f64_list_opt("r")?.unwrap_or(defaults.r),
        max_frequency: sec.f64_opt("max_frequency")?,
        frequency_convention: convention,
    })
}

pub fn reconstruct(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let s = setup(ctx.cfg)?;
    let dom = domain(ctx.cfg, &s)?;
    let rc = reconstruction_config(ctx.cfg)?;
    let q1 = potential_or_zero(ctx.cfg, "potential", &s, &dom)?;
    let q2 = potential_or_zero(ctx.cfg, "potential2", &s, &dom)?;
    ctx.note("assembling both DtN maps and estimating modes");
    let report = stability_report(q1, q2, &s.sigma, &dom, &rc)?;
    let d = s.lattice.dim();
    let xi_cols: Vec<String> = (0..d).map(|i| format!("xi{i}")).collect();
    let mut cols: Vec<&str> = xi_cols.iter().map(String::as_str).collect();
    cols.extend(["exact_re", "exact_im", "est_re", "est_im", "error", "budget", "mu"]);
    let mut table = Table::new(s.provenance(), &cols);
    for m in &report.modes {
        let mut row: Vec<String> = m.xi.iter().map(i64::to_string).collect();
        row.extend([
            num(m.exact.re),
            num(m.exact.im),
            num(m.estimate.re),
            num(m.estimate.im),
            num(m.error()),
            num(m.budget.certified),
            num(m.mu),
        ]);
        table.push(m.s_norm, row);
    }
    ctx.out.write_csv("reconstruct.csv", &table)?;
    let sobolev: Vec<_> = report
        .sobolev
        .iter()
        .map(|r| {
            json!({
                "r": r.r,
                "h_minus_r_exact": r.exact,
                "h_minus_r_bound": r.bound,
                "bound_radius": r.bound_radius,
                "exponent_expected": r.exponent_expected,
                "exponent_fitted": r.exponent_fitted,
                "fitted_constant": r.fitted_constant,
            })
        })
        .collect();
    ctx.out.write_json(
        "summary.json",
        &json!({
            "h": report.h,
            "eps_a": report.eps_a,
            "eps_d": report.eps_d,
            "m": report.m,
            "lambda": report.lambda,
            "mu": report.mu.mu,
            "mu_tilde": report.mu.mu_tilde,
            "s_choice": report.mu.s_choice,
            "regime": report.mu.regime,
            "in_range": report.mu.in_range,
            "radius": report.radius,
            "modes": report.modes.len(),
            "all_within_budget": report.all_within_budget,
            "fitted_constants": { "c": report.fitted_c, "sobolev": sobolev },
        }),
    )
}

pub fn uniqueness(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let s = setup(ctx.cfg)?;
    let dom = domain(ctx.cfg, &s)?;
    let q1 = potential_or_zero(ctx.cfg, "potential", &s, &dom)?;
    let q2 = potential_or_zero(ctx.cfg, "potential2", &s, &dom)?;
    let sec = ctx.cfg.section("uniqueness")?;
    let axis = sec.usize("axis")?;
    let xis = sec.int_lists("xi")?;
    let alphas = sec.f64_list("alpha")?;
    let report = uniqueness_check(q1, q2, &s.sigma, &dom, axis, &xis, &alphas)?;
    let d = s.lattice.dim();
    let xi_cols: Vec<String> = (0..d).map(|i| format!("xi{i}")).collect();
    let mut cols: Vec<&str> = xi_cols.iter().map(String::as_str).collect();
    cols.extend(["alpha", "branch", "exact_re", "exact_im", "est_re", "est_im", "error", "r_plus_l2", "r_minus_l2"]);
    let mut table = Table::new(s.provenance(), &cols);
    for r in &report.rows {
        let mut row: Vec<String> = r.xi.iter().map(i64::to_string).collect();
        let branch = serde_json::to_value(r.branch).expect("enum serializes");
        row.extend([
            num(r.alpha),
            branch.as_str().unwrap_or_default().to_string(),
            num(r.exact.re),
            num(r.exact.im),
            num(r.estimate.re),
            num(r.estimate.im),
            num(r.error),
            num(r.r_plus_l2),
            num(r.r_minus_l2),
        ]);
        table.push(r.eta_norm, row);
    }
    ctx.out.write_csv("uniqueness.csv", &table)?;
    let slopes: Vec<_> = report.slopes.iter().map(|(xi, slope)| json!({ "xi": xi, "slope": slope })).collect();
    ctx.out.write_json("uniqueness.json", &json!({ "axis": report.axis, "slopes": slopes }))
}
