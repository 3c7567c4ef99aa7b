use std::fmt::Write as _;
use std::fs;
use std::io::Write;

use dualpi::envs::{gridworld, random_game, GridworldParams, RandomGameParams};
use dualpi::oracle::{
    discounted_sweep, forward_invariance_search, induced_game_solve, induced_sup_dist, minimax_safety_enum,
    operator_property_sweep, safety_game_values, sign_certification, ENUM_BUDGET, OPERATOR_NAMES,
};
use dualpi::perf::{constrained_fixed_point, twofold_values};
use dualpi::safety::{ambiguity_margin, extract_invariant_set, extract_invariant_set_with_margin, optimal_safety};
use dualpi::{dpi, DpiConfig, GameSpec, PerfQ, SafetyQ, SolverSettings};

use crate::args::{ExactOracle, GameSource, GenerateArgs, SolveArgs, SolverArgs, SweepArgs, VerifyArgs};
use crate::config::{resolve, FileConfig};
use crate::export::{self, fmt_sig, PolicyFile};
use crate::schema::{game_to_json, load_game};
use crate::CliError;

/// Tolerance for the induced-game agreement check.
pub const INDUCED_AGREEMENT: f64 = 1e-7;

/// A resolved game plus its image shape for the set render.
pub struct LoadedGame {
    pub spec: GameSpec,
    pub shape: (usize, usize),
}

pub fn load_source(src: &GameSource, cfg: &FileConfig) -> Result<LoadedGame, CliError> {
    let gamma = src.gamma.or(cfg.gamma);
    let gamma_h = src.gamma_h.or(cfg.gamma_h);
    let (mut spec, shape) = if let Some(path) = &src.game {
        let spec = load_game(path)?;
        let n = spec.n_states;
        (spec, (n, 1))
    } else if let Some((w, h)) = src.grid {
        let mut p = GridworldParams::new(w, h);
        p.hazard_cells = src.hazards.clone();
        if let Some(goal) = src.goal {
            p.goal_cell = goal;
        }
        p.adversary_strength = src.adv.unwrap_or(0);
        p.check()?;
        (gridworld(&p), (w, h))
    } else {
        let defaults = RandomGameParams::default();
        let p = RandomGameParams {
            n_states: src.states.unwrap_or(defaults.n_states),
            n_u: src.prot_actions.unwrap_or(defaults.n_u),
            n_a: src.adv_actions.unwrap_or(defaults.n_a),
            hazard_fraction: src.hazard_fraction.unwrap_or(defaults.hazard_fraction),
            seed: resolve(src.seed, cfg.seed, defaults.seed),
            ..defaults
        };
        p.check()?;
        let spec = random_game(&p);
        let n = spec.n_states;
        (spec, (n, 1))
    };
    if let Some(g) = gamma {
        spec.gamma = g;
    }
    if let Some(g) = gamma_h {
        spec.gamma_h = g;
    }
    let spec = spec.checked()?;
    Ok(LoadedGame { spec, shape })
}

fn settings(args: &SolverArgs, cfg: &FileConfig) -> SolverSettings {
    let d = SolverSettings::default();
    SolverSettings::new(resolve(args.tol, cfg.tol, d.tol), resolve(args.max_iter, cfg.max_iter, d.max_iter))
}

pub fn dpi_config(args: &SolveArgs, cfg: &FileConfig) -> DpiConfig {
    let d = DpiConfig::default();
    let s = settings(&args.solver, cfg);
    DpiConfig {
        m: resolve(args.m, cfg.m, d.m),
        n: resolve(args.n, cfg.n, d.n),
        tol: s.tol,
        max_iter: s.max_iter,
        warm_start: !args.no_warm_start && cfg.warm_start.unwrap_or(d.warm_start),
        feasibility_retries: resolve(args.feasibility_retries, cfg.feasibility_retries, d.feasibility_retries),
        threshold: resolve(args.threshold, cfg.threshold, d.threshold),
        early_exit: !args.no_early_exit && cfg.early_exit.unwrap_or(d.early_exit),
    }
}

pub fn solve(args: &SolveArgs, cfg: &FileConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let game = load_source(&args.source, cfg)?;
    let dcfg = dpi_config(args, cfg);
    let res = dpi::run(&game.spec, &dcfg)?;

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let dir = &args.out;
    let policy = serde_json::to_string_pretty(&PolicyFile::from_result(&res)).expect("policy serializes") + "\n";
    export::write(&dir.join("policy.json"), policy)?;
    export::write(&dir.join("qh.csv"), export::q_csv(&res.q_h))?;
    export::write(&dir.join("q.csv"), export::q_csv(&res.q))?;
    let values = twofold_values(&res.q, &res.pi, &res.q_h, &res.inv);
    export::write(&dir.join("values.csv"), export::values_csv(&game.spec, &values, &res.inv))?;
    export::write(&dir.join("set.pgm"), export::pgm(&res.inv, game.shape.0, game.shape.1))?;
    export::write(&dir.join("trace.csv"), export::trace_csv(&res.trace))?;

    writeln!(
        out,
        "members {}/{}  steps {}  converged {}  constrained residual {}",
        res.inv.member_count(),
        game.spec.n_states,
        res.trace.steps.len(),
        res.trace.converged_early,
        fmt_sig(res.trace.final_constrained_residual)
    )
    .map_err(CliError::stdout)?;
    Ok(())
}

/// One line of the verify report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn verify_checks(args: &VerifyArgs, cfg: &FileConfig) -> Result<Vec<Check>, CliError> {
    let game = load_source(&args.source, cfg)?;
    let spec = &game.spec;
    let s = settings(&args.solver, cfg);

    let exact = match args.oracle {
        ExactOracle::Enum => minimax_safety_enum(spec, resolve(args.budget, cfg.budget, ENUM_BUDGET))?,
        ExactOracle::Game => safety_game_values(spec),
    };

    let inv = match &args.qh {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let q: SafetyQ = export::parse_q_csv(&text, spec.n_states, spec.n_u, spec.n_a)?;
            extract_invariant_set(&q, 0.0)
        }
        None => {
            let g = resolve(args.cert_gamma_h, cfg.cert_gamma_h, 0.999);
            let fp = optimal_safety(&spec.with_gamma_h(g), s)?;
            extract_invariant_set_with_margin(&fp.q, 0.0, ambiguity_margin(&fp))
        }
    };

    let mut checks = Vec::new();
    let sign = sign_certification(&inv, &exact);
    checks.push(Check {
        name: "sign-certification",
        passed: sign.passed(),
        detail: format!(
            "classified {} skipped {} mismatched {:?}",
            sign.classified, sign.skipped, sign.mismatches
        ),
    });

    let fwd = forward_invariance_search(spec, &inv);
    checks.push(Check {
        name: "forward-invariance",
        passed: fwd.passed(),
        detail: format!("explored {} exits {:?}", fwd.explored, fwd.exits),
    });

    checks.push(induced_check(spec, &inv, s));

    let pairs = resolve(args.pairs, cfg.pairs, 100);
    let props = operator_property_sweep(spec, pairs, resolve(args.source.seed, cfg.seed, 0));
    let describe = |v: &[usize; 5]| {
        OPERATOR_NAMES
            .iter()
            .zip(v)
            .map(|(n, c)| format!("{n}={c}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    checks.push(Check {
        name: "contraction",
        passed: props.contraction_violations.iter().all(|&v| v == 0),
        detail: format!("{pairs} pairs, violations {}", describe(&props.contraction_violations)),
    });
    checks.push(Check {
        name: "monotonicity",
        passed: props.monotonicity_violations.iter().all(|&v| v == 0),
        detail: format!("{pairs} pairs, violations {}", describe(&props.monotonicity_violations)),
    });
    Ok(checks)
}

fn induced_check(spec: &GameSpec, inv: &dualpi::InvariantSet, s: SolverSettings) -> Check {
    let name = "induced-game";
    if inv.is_empty() {
        return Check {
            name,
            passed: true,
            detail: "empty member set, nothing to compare".into(),
        };
    }
    let tight = SolverSettings::new(s.tol.min(1e-12), s.max_iter);
    let engine = constrained_fixed_point(spec, inv, PerfQ::zeros(spec), tight);
    let oracle = induced_game_solve(spec, inv, tight);
    match (engine, oracle) {
        (Ok(e), Ok(o)) => {
            let d = induced_sup_dist(&e.q, &o, inv);
            Check {
                name,
                passed: d <= INDUCED_AGREEMENT,
                detail: format!("sup distance {}", fmt_sig(d)),
            }
        }
        (Err(e), _) | (_, Err(e)) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

pub fn verify(args: &VerifyArgs, cfg: &FileConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let checks = verify_checks(args, cfg)?;
    let mut failed = 0;
    for c in &checks {
        failed += usize::from(!c.passed);
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} {}: {}", c.name, c.detail).map_err(CliError::stdout)?;
    }
    if failed > 0 {
        return Err(CliError::PropertyFailure(failed));
    }
    Ok(())
}

pub fn sweep_csv(spec: &GameSpec, gammas: &[f64], s: SolverSettings) -> Result<String, CliError> {
    let sweep = discounted_sweep(spec, gammas, s)?;
    let exact = safety_game_values(spec);
    let mut text = String::from("x,u,a,gamma_h,value,undiscounted\n");
    for x in 0..spec.n_states {
        for u in 0..spec.n_u {
            for a in 0..spec.n_a {
                for (g, q) in &sweep {
                    writeln!(
                        text,
                        "{x},{u},{a},{},{},{}",
                        fmt_sig(*g),
                        fmt_sig(q.get(x, u, a)),
                        fmt_sig(exact.get(x, u, a))
                    )
                    .unwrap();
                }
            }
        }
    }
    Ok(text)
}

pub fn sweep(args: &SweepArgs, cfg: &FileConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let game = load_source(&args.source, cfg)?;
    let text = sweep_csv(&game.spec, &args.gammas, settings(&args.solver, cfg))?;
    emit(args.out.as_deref(), &text, out)
}

pub fn generate(args: &GenerateArgs, cfg: &FileConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let game = load_source(&args.source, cfg)?;
    emit(args.out.as_deref(), &game_to_json(&game.spec), out)
}

fn emit(path: Option<&std::path::Path>, text: &str, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match path {
        Some(p) => export::write(p, text),
        None => out.write_all(text.as_bytes()).map_err(CliError::stdout),
    }
}
