//! Missingness-mechanism classification on finite joint distributions over
//! predictors, outcome and their missingness indicators.
//!
//! A statement such as `M_X = m ⊥ B | C` is read as independence between the
//! indicator of the event and `B` given `C`, evaluated on every conditioning
//! cell with positive mass.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
const SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Predictor,
    Outcome,
    /// Missingness indicator of the variable at this index.
    Indicator(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub card: usize,
    pub role: Role,
}

impl Variable {
    pub fn predictor(name: &str, card: usize) -> Self {
        Variable { name: name.into(), card, role: Role::Predictor }
    }

    pub fn outcome(name: &str, card: usize) -> Self {
        Variable { name: name.into(), card, role: Role::Outcome }
    }

    pub fn indicator(name: &str, of: usize) -> Self {
        Variable { name: name.into(), card: 2, role: Role::Indicator(of) }
    }
}

/// Probability table over a product of finite domains.
#[derive(Clone, Debug)]
pub struct DiscreteJoint {
    vars: Vec<Variable>,
    strides: Vec<usize>,
    probs: Vec<f64>,
    predictors: Vec<usize>,
    outcome: usize,
    /// indicator index for each predictor, in predictor order
    pred_ind: Vec<usize>,
    outcome_ind: usize,
}

impl DiscreteJoint {
    /// `probs` is indexed with the last variable varying fastest.
    pub fn new(vars: Vec<Variable>, probs: Vec<f64>) -> Result<Self> {
        let size: usize = vars.iter().map(|v| v.card).product();
        if probs.len() != size {
            return Err(Error::Input(format!("table has {} cells, expected {size}", probs.len())));
        }
        if vars.iter().any(|v| v.card == 0) {
            return Err(Error::Input("empty variable domain".into()));
        }
        if let Some(&bad) = probs.iter().find(|&&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Input(format!("negative or non-finite mass {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Input(format!("masses sum to {total}, not 1")));
        }
        let mut names = HashMap::new();
        for (i, v) in vars.iter().enumerate() {
            if names.insert(v.name.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate variable {}", v.name)));
            }
        }
        let predictors: Vec<usize> =
            (0..vars.len()).filter(|&i| vars[i].role == Role::Predictor).collect();
        let outcomes: Vec<usize> = (0..vars.len()).filter(|&i| vars[i].role == Role::Outcome).collect();
        if outcomes.len() != 1 {
            return Err(Error::Input("exactly one outcome variable is required".into()));
        }
        if predictors.is_empty() {
            return Err(Error::Input("at least one predictor is required".into()));
        }
        let indicator_of = |target: usize| -> Result<usize> {
            let found: Vec<usize> =
                (0..vars.len()).filter(|&i| vars[i].role == Role::Indicator(target)).collect();
            match found.as_slice() {
                [one] if vars[*one].card == 2 => Ok(*one),
                [one] => Err(Error::Input(format!("indicator {} must be binary", vars[*one].name))),
                _ => Err(Error::Input(format!(
                    "variable {} needs exactly one missingness indicator",
                    vars[target].name
                ))),
            }
        };
        let pred_ind = predictors.iter().map(|&j| indicator_of(j)).collect::<Result<Vec<_>>>()?;
        let outcome_ind = indicator_of(outcomes[0])?;
        for (i, v) in vars.iter().enumerate() {
            if let Role::Indicator(of) = v.role {
                if of >= vars.len() || matches!(vars[of].role, Role::Indicator(_)) {
                    return Err(Error::Input(format!("indicator {} points at no variable", vars[i].name)));
                }
            }
        }
        let mut strides = vec![1; vars.len()];
        for k in (0..vars.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * vars[k + 1].card;
        }
        Ok(DiscreteJoint {
            vars,
            strides,
            probs,
            predictors,
            outcome: outcomes[0],
            pred_ind,
            outcome_ind,
        })
    }

    /// Build a table from a mass function over configurations.
    pub fn from_fn<F: FnMut(&[usize]) -> f64>(vars: Vec<Variable>, mut mass: F) -> Result<Self> {
        let cards: Vec<usize> = vars.iter().map(|v| v.card).collect();
        let size: usize = cards.iter().product();
        let mut probs = Vec::with_capacity(size);
        let mut cfg = vec![0; cards.len()];
        for idx in 0..size {
            let mut rem = idx;
            for k in (0..cards.len()).rev() {
                cfg[k] = rem % cards[k];
                rem /= cards[k];
            }
            probs.push(mass(&cfg));
        }
        DiscreteJoint::new(vars, probs)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Input(format!("unknown variable {name:?}")))
    }

    fn config(&self, idx: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.vars).map(|(s, v)| (idx / s) % v.card).collect()
    }

    /// Iterate over (configuration, mass) pairs.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.config(i), p))
    }

    /// Probability of a partial assignment.
    pub fn prob(&self, assignment: &[(usize, usize)]) -> f64 {
        self.cells()
            .filter(|(cfg, _)| assignment.iter().all(|&(v, val)| cfg[v] == val))
            .map(|(_, p)| p)
            .sum()
    }

    /// Conditional probability `Pr(event | given)`; `None` on a null conditioning set.
    pub fn conditional(&self, event: &[(usize, usize)], given: &[(usize, usize)]) -> Option<f64> {
        let den = self.prob(given);
        if den <= 0.0 {
            return None;
        }
        let mut both = given.to_vec();
        both.extend_from_slice(event);
        Some(self.prob(&both) / den)
    }

    /// Same distribution with the variables listed in `order`.
    pub fn reordered(&self, order: &[usize]) -> Result<DiscreteJoint> {
        let mut new_pos = vec![0; order.len()];
        for (pos, &old) in order.iter().enumerate() {
            new_pos[old] = pos;
        }
        let vars: Vec<Variable> = order
            .iter()
            .map(|&old| {
                let mut v = self.vars[old].clone();
                if let Role::Indicator(of) = v.role {
                    v.role = Role::Indicator(new_pos[of]);
                }
                v
            })
            .collect();
        DiscreteJoint::from_fn(vars, |cfg| {
            let mut old_cfg = vec![0; cfg.len()];
            for (pos, &old) in order.iter().enumerate() {
                old_cfg[old] = cfg[pos];
            }
            self.probs[self.flat(&old_cfg)]
        })
    }

    /// Same distribution with the labels of variable `var` permuted by `perm`.
    pub fn relabelled(&self, var: usize, perm: &[usize]) -> Result<DiscreteJoint> {
        DiscreteJoint::from_fn(self.vars.clone(), |cfg| {
            let mut old = cfg.to_vec();
            old[var] = perm[cfg[var]];
            self.probs[self.flat(&old)]
        })
    }

    fn flat(&self, cfg: &[usize]) -> usize {
        cfg.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// Marginal table over `vars` (in the given order), as a map from values.
    fn marginal(&self, vars: &[usize]) -> HashMap<Vec<usize>, f64> {
        let mut out = HashMap::new();
        for (cfg, p) in self.cells() {
            let key: Vec<usize> = vars.iter().map(|&v| cfg[v]).collect();
            *out.entry(key).or_insert(0.0) += p;
        }
        out
    }

    fn names(&self, vars: &[usize], vals: &[usize]) -> Vec<(String, usize)> {
        vars.iter().zip(vals).map(|(&v, &x)| (self.vars[v].name.clone(), x)).collect()
    }

    /// Parse a table with one row per configuration: variable columns then
    /// `prob`. The outcome column is `outcome`; a column `M_<name>` is the
    /// missingness indicator of `<name>`; every other column is a predictor.
    pub fn from_csv(path: &Path, outcome: &str) -> Result<DiscreteJoint> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let prob_col = headers
            .iter()
            .position(|h| h == "prob")
            .ok_or_else(|| Error::Input("missing `prob` column".into()))?;
        let var_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != prob_col).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = var_cols
                .iter()
                .map(|&c| {
                    rec[c].trim().parse::<usize>().map_err(|_| {
                        Error::Input(format!("column {} holds non-integer {:?}", headers[c], &rec[c]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let p: f64 = rec[prob_col]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("bad probability {:?}", &rec[prob_col])))?;
            rows.push((vals, p));
        }
        let names: Vec<&str> = var_cols.iter().map(|&c| headers[c].as_str()).collect();
        let mut vars = Vec::new();
        for (k, name) in names.iter().enumerate() {
            let card = rows.iter().map(|(v, _)| v[k] + 1).max().unwrap_or(1).max(2);
            let role = if let Some(base) = name.strip_prefix("M_") {
                let of = names
                    .iter()
                    .position(|n| *n == base)
                    .ok_or_else(|| Error::Input(format!("indicator {name} has no variable {base}")))?;
                Role::Indicator(of)
            } else if *name == outcome {
                Role::Outcome
            } else {
                Role::Predictor
            };
            vars.push(Variable { name: name.to_string(), card, role });
        }
        let cards: Vec<usize> = vars.iter().map(|v| v.card).collect();
        let mut probs = vec![0.0; cards.iter().product()];
        for (vals, p) in rows {
            let mut idx = 0;
            for (v, c) in vals.iter().zip(&cards) {
                idx = idx * c + v;
            }
            probs[idx] += p;
        }
        DiscreteJoint::new(vars, probs)
    }
}

/// Left-hand side of a conditional-independence statement.
#[derive(Clone, Debug, PartialEq)]
pub enum Subject {
    /// A specific joint assignment, e.g. `M_X = (1, 0), M_Y = 0`.
    Event(Vec<(String, usize)>),
    /// Every value of a set of variables.
    Vars(Vec<String>),
}

/// Cell at which a conditional-independence statement fails.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub subject: Vec<(String, usize)>,
    pub given_b: Vec<(String, usize)>,
    pub given_c: Vec<(String, usize)>,
    /// Pr(subject | b, c)
    pub conditional: f64,
    /// Pr(subject | c)
    pub reduced: f64,
}

impl Witness {
    pub fn gap(&self) -> f64 {
        (self.conditional - self.reduced).abs()
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &[(String, usize)]| {
            v.iter().map(|(n, x)| format!("{n}={x}")).collect::<Vec<_>>().join(",")
        };
        write!(
            f,
            "Pr({} | {}; {}) = {:.6} vs Pr(. | {}) = {:.6}",
            show(&self.subject),
            show(&self.given_b),
            show(&self.given_c),
            self.conditional,
            show(&self.given_c),
            self.reduced
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Flag {
    Holds,
    Fails(Witness),
    /// Every conditioning set involved has zero probability.
    Undefined,
}

impl Flag {
    pub fn holds(&self) -> bool {
        matches!(self, Flag::Holds)
    }

    pub fn fails(&self) -> bool {
        matches!(self, Flag::Fails(_))
    }

    fn label(&self) -> &'static str {
        match self {
            Flag::Holds => "holds",
            Flag::Fails(_) => "fails",
            Flag::Undefined => "undefined",
        }
    }
}

fn check_ci_idx(
    joint: &DiscreteJoint,
    subject: &[(usize, Option<usize>)],
    b: &[usize],
    c: &[usize],
    tol: f64,
) -> Flag {
    let a_vars: Vec<usize> = subject.iter().map(|&(v, _)| v).collect();
    let mut all = a_vars.clone();
    all.extend_from_slice(b);
    all.extend_from_slice(c);
    let joint_abc = joint.marginal(&all);
    let mut bc = b.to_vec();
    bc.extend_from_slice(c);
    let m_bc = joint.marginal(&bc);
    let m_c = joint.marginal(c);
    let mut ac = a_vars.clone();
    ac.extend_from_slice(c);
    let m_ac = joint.marginal(&ac);

    let na = a_vars.len();
    let nb = b.len();
    let mut any_defined = false;

    // deterministic iteration order over the (b, c) cells
    let mut bc_cells: Vec<_> = m_bc.iter().filter(|(_, &p)| p > 0.0).collect();
    bc_cells.sort_by(|x, y| x.0.cmp(y.0));
    let a_values: Vec<Vec<usize>> = {
        let fixed: Vec<Option<usize>> = subject.iter().map(|&(_, v)| v).collect();
        let mut out = vec![Vec::new()];
        for (k, &v) in a_vars.iter().enumerate() {
            let choices: Vec<usize> = match fixed[k] {
                Some(x) => vec![x],
                None => (0..joint.vars[v].card).collect(),
            };
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |&x| {
                        let mut p = prefix.clone();
                        p.push(x);
                        p
                    })
                })
                .collect();
        }
        out
    };

    for (bc_val, &p_bc) in bc_cells {
        let c_val = &bc_val[nb..];
        let p_c = m_c.get(c_val).copied().unwrap_or(0.0);
        any_defined = true;
        for a_val in &a_values {
            let mut k_abc = a_val.clone();
            k_abc.extend_from_slice(bc_val);
            let p_abc = joint_abc.get(&k_abc).copied().unwrap_or(0.0);
            let mut k_ac = a_val.clone();
            k_ac.extend_from_slice(c_val);
            let p_ac = m_ac.get(&k_ac).copied().unwrap_or(0.0);
            let cond = p_abc / p_bc;
            let reduced = p_ac / p_c;
            if (cond - reduced).abs() > tol {
                return Flag::Fails(Witness {
                    subject: joint.names(&a_vars, &a_val[..na]),
                    given_b: joint.names(b, &bc_val[..nb]),
                    given_c: joint.names(c, c_val),
                    conditional: cond,
                    reduced,
                });
            }
        }
    }
    if any_defined {
        Flag::Holds
    } else {
        Flag::Undefined
    }
}

/// Test `a ⊥ b | c` on every conditioning cell with positive mass.
pub fn check_ci(joint: &DiscreteJoint, a: &Subject, b: &[&str], c: &[&str], tol: f64) -> Result<Flag> {
    if !(tol > 0.0) {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    let subject: Vec<(usize, Option<usize>)> = match a {
        Subject::Event(assign) => assign
            .iter()
            .map(|(n, v)| {
                let idx = joint.index_of(n)?;
                if *v >= joint.vars[idx].card {
                    return Err(Error::Input(format!("value {v} outside domain of {n}")));
                }
                Ok((idx, Some(*v)))
            })
            .collect::<Result<_>>()?,
        Subject::Vars(names) => {
            names.iter().map(|n| Ok((joint.index_of(n)?, None))).collect::<Result<_>>()?
        }
    };
    let b = b.iter().map(|n| joint.index_of(n)).collect::<Result<Vec<_>>>()?;
    let c = c.iter().map(|n| joint.index_of(n)).collect::<Result<Vec<_>>>()?;
    Ok(check_ci_idx(joint, &subject, &b, &c, tol))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MechanismReport {
    pub mcar: Flag,
    pub mar: Flag,
    pub marx_ym: Flag,
    pub marx_yo: Flag,
    pub nimo: Flag,
    pub nico: Flag,
}

impl MechanismReport {
    pub fn flags(&self) -> [(&'static str, &Flag); 6] {
        [
            ("MCAR", &self.mcar),
            ("MAR", &self.mar),
            ("MARX-YM", &self.marx_ym),
            ("MARX-YO", &self.marx_yo),
            ("NIMO", &self.nimo),
            ("NICO", &self.nico),
        ]
    }

    /// Implications that this report violates (antecedent holds, consequent fails).
    pub fn lattice_violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut imp = |name: &'static str, ante: bool, cons: &Flag| {
            if ante && cons.fails() {
                out.push(name);
            }
        };
        imp("MCAR => MAR", self.mcar.holds(), &self.mar);
        imp("MCAR => MARX-YM", self.mcar.holds(), &self.marx_ym);
        imp("MAR => MARX-YO", self.mar.holds(), &self.marx_yo);
        imp("MARX-YM => MARX-YO", self.marx_ym.holds(), &self.marx_yo);
        imp("MARX-YM => NIMO", self.marx_ym.holds(), &self.nimo);
        imp("NIMO => NICO", self.nimo.holds(), &self.nico);
        imp("NIMO & MARX-YO => MARX-YM", self.nimo.holds() && self.marx_yo.holds(), &self.marx_ym);
        out
    }
}

impl fmt::Display for MechanismReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, flag) in self.flags() {
            write!(f, "{name:<8} {:<9}", flag.label())?;
            if let Flag::Fails(w) = flag {
                write!(f, " {w}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn combine(flags: impl IntoIterator<Item = Flag>) -> Flag {
    let mut any_holds = false;
    for f in flags {
        match f {
            Flag::Fails(_) => return f,
            Flag::Holds => any_holds = true,
            Flag::Undefined => {}
        }
    }
    if any_holds {
        Flag::Holds
    } else {
        Flag::Undefined
    }
}

fn all_patterns(p: usize) -> Vec<Vec<usize>> {
    (0..(1usize << p)).map(|code| (0..p).map(|j| (code >> (p - 1 - j)) & 1).collect()).collect()
}

/// Decide every mechanism flag for `joint`.
pub fn classify(joint: &DiscreteJoint, tol: f64) -> MechanismReport {
    let x = &joint.predictors;
    let y = joint.outcome;
    let mx = &joint.pred_ind;
    let my = joint.outcome_ind;
    let p = x.len();

    let positive: Vec<Vec<usize>> = all_patterns(p)
        .into_iter()
        .filter(|m| {
            let assign: Vec<(usize, usize)> = mx.iter().copied().zip(m.iter().copied()).collect();
            joint.prob(&assign) > 0.0
        })
        .collect();
    let split = |m: &[usize]| -> (Vec<usize>, Vec<usize>) {
        let obs = (0..p).filter(|&j| m[j] == 0).map(|j| x[j]).collect();
        let mis = (0..p).filter(|&j| m[j] == 1).map(|j| x[j]).collect();
        (obs, mis)
    };
    let event = |m: &[usize]| -> Vec<(usize, Option<usize>)> {
        mx.iter().copied().zip(m.iter().map(|&v| Some(v))).collect()
    };

    let mut all_ind: Vec<(usize, Option<usize>)> = mx.iter().map(|&v| (v, None)).collect();
    all_ind.push((my, None));
    let mut xy: Vec<usize> = x.clone();
    xy.push(y);
    let mcar = check_ci_idx(joint, &all_ind, &xy, &[], tol);

    let mut mar_clauses = Vec::new();
    for m in &positive {
        let (obs, mis) = split(m);
        for my_val in 0..2 {
            let mut ev = event(m);
            ev.push((my, Some(my_val)));
            let ev_assign: Vec<(usize, usize)> = ev.iter().map(|&(v, x)| (v, x.unwrap())).collect();
            if joint.prob(&ev_assign) <= 0.0 {
                continue;
            }
            let flag = if my_val == 0 {
                let mut c = obs.clone();
                c.push(y);
                check_ci_idx(joint, &ev, &mis, &c, tol)
            } else {
                let mut b = mis.clone();
                b.push(y);
                check_ci_idx(joint, &ev, &b, &obs, tol)
            };
            mar_clauses.push(flag);
        }
    }
    let mut mar = combine(mar_clauses);
    // With no mass on a missing outcome the second MAR clause is vacuous; that
    // is reported as undefined rather than as holding.
    if mar.holds() && joint.prob(&[(my, 1)]) <= 0.0 {
        mar = Flag::Undefined;
    }

    let marx_ym = combine(positive.iter().map(|m| {
        let (obs, mut mis) = split(m);
        mis.push(y);
        check_ci_idx(joint, &event(m), &mis, &obs, tol)
    }));
    let marx_yo = combine(positive.iter().map(|m| {
        let (mut obs, mis) = split(m);
        obs.push(y);
        check_ci_idx(joint, &event(m), &mis, &obs, tol)
    }));
    let nimo = combine(positive.iter().map(|m| {
        let (obs, _) = split(m);
        check_ci_idx(joint, &event(m), &[y], &obs, tol)
    }));
    let zero = vec![0; p];
    let nico = if positive.contains(&zero) {
        check_ci_idx(joint, &event(&zero), &[y], x, tol)
    } else {
        Flag::Undefined
    };
    MechanismReport { mcar, mar, marx_ym, marx_yo, nimo, nico }
}

#[derive(Clone, Debug, Default)]
pub struct LatticeReport {
    pub joints: usize,
    /// (joint index, violated implication)
    pub violations: Vec<(usize, &'static str)>,
    /// How often each flag held, in report order.
    pub holds_counts: [usize; 6],
}

/// Classify every joint and count violations of the implication lattice.
pub fn verify_lattice(joints: &[DiscreteJoint], tol: f64) -> Result<LatticeReport> {
    if joints.is_empty() {
        return Err(Error::Input("need at least one joint".into()));
    }
    let reports = crate::exec::map_slice(joints, |j| classify(j, tol));
    let mut out = LatticeReport { joints: joints.len(), ..Default::default() };
    for (i, r) in reports.iter().enumerate() {
        for v in r.lattice_violations() {
            out.violations.push((i, v));
        }
        for (k, (_, f)) in r.flags().iter().enumerate() {
            if f.holds() {
                out.holds_counts[k] += 1;
            }
        }
    }
    Ok(out)
}

fn standard_vars() -> Vec<Variable> {
    vec![
        Variable::predictor("X1", 2),
        Variable::predictor("X2", 2),
        Variable::outcome("Y", 2),
        Variable::indicator("M1", 0),
        Variable::indicator("M2", 1),
        Variable::indicator("MY", 2),
    ]
}

fn dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

fn bern(p: f64, v: usize) -> f64 {
    if v == 1 {
        p
    } else {
        1.0 - p
    }
}

/// Random joint over binary X1, X2, Y with indicators M1, M2, MY.
///
/// Half of the draws put a Dirichlet law on the indicators given (X1, X2, Y);
/// the other half draw each indicator from a random parent set so that the
/// independence flags hold with positive frequency. X2 is always observed
/// unless `two_missable`.
pub fn random_joint<R: Rng + ?Sized>(rng: &mut R, two_missable: bool) -> DiscreteJoint {
    let base = dirichlet(rng, 8);
    let structured = rng.random_bool(0.5);
    let mut cond = HashMap::new();
    let mut unstructured = Vec::new();
    if structured {
        // parent masks over (X1, X2, Y, M1) for M1, M2, MY
        let masks = [rng.random_range(0..8u32), rng.random_range(0..8u32), rng.random_range(0..16u32)];
        for (k, &mask) in masks.iter().enumerate() {
            for key in 0..16u32 {
                cond.insert((k, key & mask), rng.random_range(0.05..0.95));
            }
        }
        let mut adjusted = HashMap::new();
        for k in 0..3 {
            for key in 0..16u32 {
                adjusted.insert((k, key), cond[&(k, key & masks[k])]);
            }
        }
        cond = adjusted;
    } else {
        unstructured = (0..8).map(|_| dirichlet(rng, 8)).collect::<Vec<_>>();
    }
    DiscreteJoint::from_fn(standard_vars(), |c| {
        let (x1, x2, y, m1, m2, my) = (c[0], c[1], c[2], c[3], c[4], c[5]);
        let xyz = x1 * 4 + x2 * 2 + y;
        let pxy = base[xyz];
        if !two_missable && m2 == 1 {
            return 0.0;
        }
        if structured {
            let key = (x1 | (x2 << 1) | (y << 2)) as u32;
            let pm1 = bern(cond[&(0, key)], m1);
            let pm2 = if two_missable { bern(cond[&(1, key)], m2) } else { 1.0 };
            let pmy = bern(cond[&(2, key | ((m1 as u32) << 3))], my);
            pxy * pm1 * pm2 * pmy
        } else {
            let w = &unstructured[xyz];
            if two_missable {
                pxy * w[m1 * 4 + m2 * 2 + my]
            } else {
                // fold the M2 = 1 mass back onto M2 = 0
                pxy * (w[m1 * 4 + my] + w[m1 * 4 + 2 + my])
            }
        }
    })
    .expect("random joint is a valid distribution")
}

/// Parameters of the two-variable example showing MAR without MARX-YM, NIMO
/// or NICO. `b != c` is what breaks the predictor-only statements.
#[derive(Clone, Copy, Debug)]
pub struct MarOnlyParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl Default for MarOnlyParams {
    fn default() -> Self {
        MarOnlyParams { a: 0.1, b: 0.05, c: 0.2, d: 0.1, e: 0.15 }
    }
}

/// Joint over binary X, Y, M_X, M_Y where Pr(M_X, M_Y | X, Y) follows the
/// parametrised table and `pxy[x][y]` is the law of (X, Y).
pub fn mar_only_joint(params: MarOnlyParams, pxy: [[f64; 2]; 2]) -> Result<DiscreteJoint> {
    let MarOnlyParams { a, b, c, d, e } = params;
    let cond = |x: usize, y: usize, mx: usize, my: usize| -> f64 {
        let miss_x = if y == 0 { b } else { c };
        let miss_y = if x == 0 { d } else { e };
        match (mx, my) {
            (0, 0) => 1.0 - (a + miss_x + miss_y),
            (0, 1) => miss_y,
            (1, 0) => miss_x,
            _ => a,
        }
    };
    for x in 0..2 {
        for y in 0..2 {
            for mx in 0..2 {
                for my in 0..2 {
                    let v = cond(x, y, mx, my);
                    if !(v > 0.0 && v < 1.0) {
                        return Err(Error::Input(format!("mechanism table entry {v} outside (0,1)")));
                    }
                }
            }
        }
    }
    let vars = vec![
        Variable::predictor("X", 2),
        Variable::outcome("Y", 2),
        Variable::indicator("M_X", 0),
        Variable::indicator("M_Y", 1),
    ];
    DiscreteJoint::from_fn(vars, |cfg| pxy[cfg[0]][cfg[1]] * cond(cfg[0], cfg[1], cfg[2], cfg[3]))
}

/// Two missable binary predictors whose indicators depend on both predictors.
#[derive(Clone, Copy, Debug)]
pub struct CcsParams {
    pub px: [[f64; 2]; 2],
    /// Pr(Y = 1 | x1, x2)
    pub py: [[f64; 2]; 2],
    /// Pr(M1 = 1 | x1, x2)
    pub pm1: [[f64; 2]; 2],
    /// Pr(M2 = 1 | x1, x2)
    pub pm2: [[f64; 2]; 2],
}

impl Default for CcsParams {
    fn default() -> Self {
        CcsParams {
            px: [[0.3, 0.2], [0.2, 0.3]],
            py: [[0.1, 0.6], [0.4, 0.9]],
            pm1: [[0.1, 0.7], [0.2, 0.8]],
            pm2: [[0.25, 0.8], [0.3, 0.8]],
        }
    }
}

impl CcsParams {
    /// Indicators depend on X1 only, so neither carries information on Y
    /// beyond X1 and the three limits coincide.
    pub fn degenerate() -> Self {
        CcsParams {
            pm1: [[0.2, 0.2], [0.5, 0.5]],
            pm2: [[0.3, 0.3], [0.6, 0.6]],
            ..CcsParams::default()
        }
    }
}

/// Limits of the complete-case sub-model for pattern (M1 = 0, M2 = 1) next to
/// the MU and MC targets, at X1 = `x1`.
#[derive(Clone, Debug)]
pub struct CcsDemonstration {
    pub joint: DiscreteJoint,
    pub x1: usize,
    /// Pr(Y=1 | X1, M1=0)
    pub ccs_limit: f64,
    /// Pr(Y=1 | X1)
    pub mu: f64,
    /// Pr(Y=1 | X1, M1=0, M2=1)
    pub mc: f64,
}

impl CcsDemonstration {
    pub fn gap_mu(&self) -> f64 {
        (self.ccs_limit - self.mu).abs()
    }

    pub fn gap_mc(&self) -> f64 {
        (self.ccs_limit - self.mc).abs()
    }
}

pub fn ccs_counterexample_with(params: CcsParams) -> Result<CcsDemonstration> {
    let vars = standard_vars();
    let joint = DiscreteJoint::from_fn(vars, |c| {
        let (x1, x2, y, m1, m2, my) = (c[0], c[1], c[2], c[3], c[4], c[5]);
        if my == 1 {
            return 0.0;
        }
        params.px[x1][x2]
            * bern(params.py[x1][x2], y)
            * bern(params.pm1[x1][x2], m1)
            * bern(params.pm2[x1][x2], m2)
    })?;
    let (x1v, yv, m1v, m2v) = (0, 2, 3, 4);
    let x1 = 1;
    let cond = |given: &[(usize, usize)]| {
        joint
            .conditional(&[(yv, 1)], given)
            .ok_or_else(|| Error::Numeric("null conditioning set in counterexample".into()))
    };
    let ccs_limit = cond(&[(x1v, x1), (m1v, 0)])?;
    let mu = cond(&[(x1v, x1)])?;
    let mc = cond(&[(x1v, x1), (m1v, 0), (m2v, 1)])?;
    Ok(CcsDemonstration { joint, x1, ccs_limit, mu, mc })
}

/// Default instance where the complete-case sub-model limit differs from both targets.
pub fn ccs_counterexample() -> Result<CcsDemonstration> {
    ccs_counterexample_with(CcsParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn s1() -> DiscreteJoint {
        mar_only_joint(MarOnlyParams::default(), [[0.25; 2]; 2]).unwrap()
    }

    #[test]
    fn product_distribution_is_independent() {
        let vars = vec![
            Variable::predictor("A", 2),
            Variable::predictor("B", 3),
            Variable::outcome("C", 2),
            Variable::indicator("MA", 0),
            Variable::indicator("MB", 1),
            Variable::indicator("MC", 2),
        ];
        let pa = [0.3, 0.7];
        let pb = [0.2, 0.5, 0.3];
        let pc = [0.6, 0.4];
        let j = DiscreteJoint::from_fn(vars, |c| {
            let ind = if c[3] + c[4] + c[5] == 0 { 1.0 } else { 0.0 };
            pa[c[0]] * pb[c[1]] * pc[c[2]] * ind
        })
        .unwrap();
        let f = check_ci(&j, &Subject::Vars(vec!["A".into()]), &["B"], &["C"], DEFAULT_TOL).unwrap();
        assert_eq!(f, Flag::Holds);
    }

    #[test]
    fn mar_only_statements() {
        let j = s1();
        let ev = Subject::Event(vec![("M_X".into(), 1), ("M_Y".into(), 0)]);
        assert!(check_ci(&j, &ev, &["X"], &["Y"], DEFAULT_TOL).unwrap().holds());
        let ev0 = Subject::Event(vec![("M_X".into(), 0)]);
        match check_ci(&j, &ev0, &["Y"], &["X"], DEFAULT_TOL).unwrap() {
            Flag::Fails(w) => assert!(w.gap() > 0.05, "{w}"),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn unknown_variable_is_input_error() {
        let err = check_ci(&s1(), &Subject::Vars(vec!["Z".into()]), &["X"], &[], DEFAULT_TOL);
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn constant_b_always_holds() {
        let j = ccs_counterexample().unwrap();
        // MY is constant 0 in this joint
        let f = check_ci(&j.joint, &Subject::Vars(vec!["Y".into()]), &["MY"], &["X1"], DEFAULT_TOL);
        assert!(f.unwrap().holds());
    }

    #[test]
    fn mar_only_classification() {
        let r = classify(&s1(), DEFAULT_TOL);
        assert!(r.mar.holds(), "{r}");
        assert!(r.marx_yo.holds(), "{r}");
        assert!(r.marx_ym.fails());
        assert!(r.nimo.fails());
        assert!(r.nico.fails());
        assert!(r.mcar.fails());
        assert!(r.lattice_violations().is_empty());
    }

    #[test]
    fn independent_missingness_is_mcar() {
        let vars = standard_vars();
        let j = DiscreteJoint::from_fn(vars, |c| {
            let pxy = [0.1, 0.2, 0.05, 0.15, 0.1, 0.1, 0.2, 0.1][c[0] * 4 + c[1] * 2 + c[2]];
            pxy * bern(0.3, c[3]) * bern(0.2, c[4]) * bern(0.1, c[5])
        })
        .unwrap();
        let r = classify(&j, DEFAULT_TOL);
        for (name, f) in r.flags() {
            assert!(f.holds(), "{name}: {r}");
        }
    }

    #[test]
    fn missing_outcome_never_observed_makes_mar_undefined() {
        let vars = standard_vars();
        let j = DiscreteJoint::from_fn(vars, |c| {
            if c[4] == 1 || c[5] == 1 {
                return 0.0;
            }
            0.125 * bern(0.3, c[3])
        })
        .unwrap();
        let r = classify(&j, DEFAULT_TOL);
        assert_eq!(r.mar, Flag::Undefined);
        assert!(r.mcar.holds());
    }

    #[test]
    fn zero_complete_pattern_makes_nico_undefined() {
        let vars = standard_vars();
        let j = DiscreteJoint::from_fn(vars, |c| {
            if c[4] == 1 || c[3] == 0 {
                return 0.0;
            }
            0.125 * bern(0.5, c[5])
        })
        .unwrap();
        assert_eq!(classify(&j, DEFAULT_TOL).nico, Flag::Undefined);
    }

    #[test]
    fn ccs_counterexample_gaps() {
        let d = ccs_counterexample().unwrap();
        assert!(d.gap_mu() >= 0.01, "{d:?}");
        assert!(d.gap_mc() >= 0.01, "{d:?}");
        assert!(classify(&d.joint, DEFAULT_TOL).mar.fails() || {
            // MY is never missing here, so MAR can only fail or be undefined
            classify(&d.joint, DEFAULT_TOL).mar == Flag::Undefined
        });
    }

    #[test]
    fn ccs_degenerate_case_coincides() {
        let d = ccs_counterexample_with(CcsParams::degenerate()).unwrap();
        assert!(d.gap_mu() < 1e-12 && d.gap_mc() < 1e-12, "{d:?}");
    }

    #[test]
    fn random_joints_respect_lattice() {
        let mut rng = seed::rng(11);
        let joints: Vec<_> = (0..200).map(|i| random_joint(&mut rng, i % 2 == 0)).collect();
        let rep = verify_lattice(&joints, DEFAULT_TOL).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let j = s1();
        let mut w = csv::Writer::from_path(&path).unwrap();
        w.write_record(["X", "Y", "M_X", "M_Y", "prob"]).unwrap();
        for (cfg, p) in j.cells() {
            let mut rec: Vec<String> = cfg.iter().map(|v| v.to_string()).collect();
            rec.push(format!("{p:e}"));
            w.write_record(&rec).unwrap();
        }
        w.flush().unwrap();
        let back = DiscreteJoint::from_csv(&path, "Y").unwrap();
        assert_eq!(classify(&back, DEFAULT_TOL), classify(&j, DEFAULT_TOL));
    }
}
