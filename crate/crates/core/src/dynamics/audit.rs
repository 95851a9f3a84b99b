//! Read/write instrumentation of the staged update.
//!
//! Each stage of [`super::discrete_step`] appends one [`StageRecord`] naming
//! the variable it writes and every value it reads, tagged with the time
//! level of the read. The checks below turn the records into a dependency
//! graph and compare it with [`DEPENDENCY_TABLE`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Quantities produced or consumed inside one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Neuromodulator vector `μ`.
    Mu,
    Q,
    W,
    /// Interconnector signals `(C_RL, C_LR)`.
    Coupling,
    H,
    X,
    Y,
    Routing,
    /// Learning signal `δ`.
    Delta,
    Rho,
    Traces,
    Theta,
    P,
    M,
    /// Homeostatic deviation `h`.
    Homeostatic,
    PredError,
    Novelty,
    Outcome,
    /// Reliability errors `ε_i`.
    RelErr,
    Broadcast,
    MemGate,
    /// Exogenous drive `u`.
    Input,
    Action,
}

/// Time level of a read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Time {
    /// `Z^t` or the input at `t`.
    Current,
    /// `Z^{t-1}`.
    Previous,
    /// A delayed tap `Z^{t-n}`.
    Delayed,
    /// A component of `Z^{t+1}` produced earlier in the same step.
    Next,
    /// A stagewise intermediate produced earlier in the same step.
    Derived,
}

impl Time {
    /// Reads at these levels must have been written earlier in the step.
    pub fn is_within_step(self) -> bool {
        matches!(self, Time::Next | Time::Derived)
    }
}

pub type Access = (Var, Time);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub stage: &'static str,
    pub writes: Var,
    /// `Next` for state components, `Derived` for intermediates.
    pub level: Time,
    pub reads: Vec<Access>,
}

/// Ordered log of one instrumented step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Audit {
    pub records: Vec<StageRecord>,
}

impl Audit {
    pub fn new() -> Self {
        Audit::default()
    }

    pub fn record(&mut self, stage: &'static str, writes: Var, level: Time, reads: &[Access]) {
        self.records.push(StageRecord {
            stage,
            writes,
            level,
            reads: reads.to_vec(),
        });
    }

    pub fn find(&self, writes: Var) -> Option<&StageRecord> {
        self.records
            .iter()
            .find(|r| r.writes == writes && r.level == Time::Next)
            .or_else(|| self.records.iter().find(|r| r.writes == writes))
    }
}

/// Within-step dependencies of the update, one row per written variable.
/// Rows list the reads that fix the stage order; reads of `Z^t` that carry
/// no ordering information are listed where they distinguish old from new.
pub const DEPENDENCY_TABLE: &[(Var, &[Access])] = &[
    (Var::Mu, &[(Var::Y, Time::Current)]),
    (Var::Q, &[(Var::Mu, Time::Derived)]),
    (Var::W, &[(Var::X, Time::Current), (Var::Mu, Time::Derived)]),
    (
        Var::Coupling,
        &[
            (Var::X, Time::Delayed),
            (Var::H, Time::Delayed),
            (Var::Routing, Time::Current),
        ],
    ),
    (Var::H, &[(Var::Q, Time::Next), (Var::Coupling, Time::Derived)]),
    (Var::X, &[(Var::W, Time::Next), (Var::Coupling, Time::Derived)]),
    (
        Var::Y,
        &[
            (Var::H, Time::Next),
            (Var::X, Time::Next),
            (Var::Homeostatic, Time::Derived),
            (Var::PredError, Time::Derived),
            (Var::Novelty, Time::Derived),
            (Var::Outcome, Time::Derived),
        ],
    ),
    (
        Var::Routing,
        &[
            (Var::H, Time::Next),
            (Var::X, Time::Next),
            (Var::Y, Time::Next),
            (Var::Rho, Time::Current),
        ],
    ),
    (Var::Delta, &[(Var::Y, Time::Next)]),
    (Var::Rho, &[(Var::RelErr, Time::Derived)]),
    (
        Var::Traces,
        &[
            (Var::Traces, Time::Current),
            (Var::Theta, Time::Current),
            (Var::Delta, Time::Derived),
        ],
    ),
    (
        Var::Theta,
        &[
            (Var::Traces, Time::Current),
            (Var::Theta, Time::Current),
            (Var::Delta, Time::Derived),
        ],
    ),
    (
        Var::P,
        &[
            (Var::Mu, Time::Derived),
            (Var::Traces, Time::Current),
            (Var::Theta, Time::Current),
            (Var::H, Time::Next),
            (Var::X, Time::Next),
            (Var::Y, Time::Next),
        ],
    ),
    (Var::M, &[(Var::H, Time::Next), (Var::Y, Time::Next)]),
];

/// Every read at level `Next` or `Derived` refers to a value written by an
/// earlier record, and no record reads its own output at `Next`.
pub fn check_causality(audit: &Audit) -> Result<(), String> {
    let mut written: Vec<(Var, Time)> = Vec::new();
    for r in &audit.records {
        for (v, t) in &r.reads {
            if *v == r.writes && *t == Time::Next {
                return Err(format!("stage {} reads its own output {:?} at t+1", r.stage, v));
            }
            if t.is_within_step() && !written.contains(&(*v, *t)) {
                return Err(format!("stage {} reads {:?}@{:?} before it is written", r.stage, v, t));
            }
        }
        written.push((r.writes, r.level));
    }
    Ok(())
}

/// Kahn's algorithm on the graph whose nodes are written values and whose
/// edges run from each within-step read to the write. Returns a topological
/// order of the written values.
pub fn topological_order(audit: &Audit) -> Result<Vec<Access>, String> {
    let mut nodes: Vec<Access> = Vec::new();
    for r in &audit.records {
        let key = (r.writes, r.level);
        if !nodes.contains(&key) {
            nodes.push(key);
        }
    }
    let index = |a: &Access| nodes.iter().position(|n| n == a);
    let n = nodes.len();
    let mut adj: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    let mut indeg = alloc::vec![0usize; n];
    for r in &audit.records {
        let to = index(&(r.writes, r.level)).expect("node registered above");
        for a in &r.reads {
            if !a.1.is_within_step() {
                continue;
            }
            let Some(from) = index(a) else {
                return Err(format!(
                    "stage {} reads {:?}@{:?}, which no stage writes",
                    r.stage, a.0, a.1
                ));
            };
            if !adj[from].contains(&to) {
                adj[from].push(to);
                indeg[to] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|i| indeg[*i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(nodes[i]);
        for &j in &adj[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.push(j);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        let stuck: Vec<Access> = (0..n).filter(|i| indeg[*i] > 0).map(|i| nodes[i]).collect();
        Err(format!("dependency cycle among {stuck:?}"))
    }
}

/// Row-by-row comparison with [`DEPENDENCY_TABLE`]: every table row has a
/// record whose reads contain the row, and the record's reads of `t+1`
/// components are exactly the row's.
pub fn check_table(audit: &Audit) -> Result<(), String> {
    for (var, row) in DEPENDENCY_TABLE {
        let rec = audit.find(*var).ok_or_else(|| format!("no stage writes {var:?}"))?;
        for a in row.iter() {
            if !rec.reads.contains(a) {
                return Err(format!(
                    "stage {} writing {var:?} does not read {:?}@{:?}",
                    rec.stage, a.0, a.1
                ));
            }
        }
        for a in rec.reads.iter().filter(|a| a.1 == Time::Next) {
            if !row.contains(a) {
                return Err(format!(
                    "stage {} writing {var:?} reads {:?}@Next outside the table",
                    rec.stage, a.0
                ));
            }
        }
    }
    Ok(())
}

/// Adjacency of the recorded graph, for reporting.
pub fn edges(audit: &Audit) -> BTreeMap<Access, Vec<Access>> {
    let mut out: BTreeMap<Access, Vec<Access>> = BTreeMap::new();
    for r in &audit.records {
        let e = out.entry((r.writes, r.level)).or_default();
        for a in &r.reads {
            if a.1.is_within_step() && !e.contains(a) {
                e.push(*a);
            }
        }
    }
    out
}

/// All three checks.
pub fn verify(audit: &Audit) -> Result<(), String> {
    check_causality(audit)?;
    topological_order(audit)?;
    check_table(audit)
}
