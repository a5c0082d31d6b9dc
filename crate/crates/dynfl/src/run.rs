//! The sliding-window benchmark driver.
//!
//! A run fills the window with insertions, then slides it over the client
//! permutation: each step inserts the entering point and deletes the leaving
//! one. Every update appends one metric row. The audit policy can trigger
//! the full invariant auditor (plus the dual certificate in the proven
//! parameter regime) after updates; any failure aborts the run.

use std::str::FromStr;
use std::time::Instant;

use dynfl_core::baselines::{nearest_facility, static_greedy, BaselineSolution};
use dynfl_core::engine::{ClusteringState, InsertionPolicy, RecourseLedger};
use dynfl_core::instance::{ClientId, LevelGeometry, MetricInstance};
use dynfl_core::verify::{audit, build_dual, check_certificate, detector_equivalence, exact_opt};

use crate::error::HarnessError;
use crate::io::PointSet;
use crate::records::{RunRecord, UpdateOp};
use crate::stream::{calibrate_costs, permutation, split_facilities};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Nice,
    GreedyOff,
    Nearest,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nice" => Ok(Algorithm::Nice),
            "greedy-off" => Ok(Algorithm::GreedyOff),
            "nearest" => Ok(Algorithm::Nearest),
            other => Err(format!("unknown algorithm {other:?} (use nice|greedy-off|nearest)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditPolicy {
    None,
    Every(u64),
    All,
}

impl AuditPolicy {
    fn triggers(&self, update_index: usize) -> bool {
        match *self {
            AuditPolicy::None => false,
            AuditPolicy::All => true,
            AuditPolicy::Every(n) => (update_index as u64 + 1).is_multiple_of(n),
        }
    }
}

impl FromStr for AuditPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "none" {
            return Ok(AuditPolicy::None);
        }
        if s == "all" {
            return Ok(AuditPolicy::All);
        }
        if let Some(rest) = s.strip_prefix("every:") {
            let n: u64 = rest.parse().map_err(|_| format!("bad audit period {rest:?}"))?;
            if n == 0 {
                return Err("audit period must be positive".into());
            }
            return Ok(AuditPolicy::Every(n));
        }
        Err(format!("unknown audit policy {s:?} (use none|every:<N>|all)"))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub mu: i32,
    pub seed: u64,
    pub window: usize,
    pub facility_fraction: f64,
    pub audit: AuditPolicy,
    pub max_updates: Option<usize>,
    pub insertion_policy: InsertionPolicy,
    /// Track max(solution cost / exact optimum) at audited updates
    /// (instances with at most 20 facilities; intended for tiny ones).
    pub track_opt_ratio: bool,
    /// Cross-check the incremental detector against exhaustive search at
    /// every update with at most this many active clients.
    pub equivalence_limit: Option<usize>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        RunConfig {
            algorithm,
            epsilon: 1.0,
            mu: 3,
            seed: 0,
            window: 1000,
            facility_fraction: 0.05,
            audit: AuditPolicy::None,
            max_updates: None,
            insertion_policy: InsertionPolicy::NearestOpen,
            track_opt_ratio: false,
            equivalence_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    /// Final engine ledger (nice algorithm only).
    pub ledger: Option<RecourseLedger>,
    pub max_opt_ratio: Option<f64>,
    pub facility_count: usize,
    pub opening_cost: f64,
    pub audits_passed: usize,
    pub equivalence_checks: usize,
}

/// Runs one algorithm over the sliding-window stream induced by the point
/// set and configuration. Deterministic: every output except the wall-time
/// column is a function of (points, config).
pub fn run_stream(points: &PointSet, config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let offset = 1.0 / points.len() as f64;
    let (facility_points, client_points) =
        split_facilities(points, config.facility_fraction, config.seed)?;
    let opening_cost = calibrate_costs(&facility_points, &client_points, offset)?;
    let facility_count = facility_points.len();
    if config.window == 0 || config.window > client_points.len() {
        return Err(HarnessError::Config(format!(
            "window {} must be in [1, {}]",
            config.window,
            client_points.len()
        )));
    }
    let order = permutation(client_points.len(), config.seed.wrapping_add(1));
    let mut instance = MetricInstance::with_points(
        facility_points,
        vec![opening_cost; facility_count],
        offset,
    )?;
    let geometry = LevelGeometry::new(config.epsilon, config.mu)?;

    // The update plan: window fill, then insert/delete pairs.
    let mut plan: Vec<(UpdateOp, usize)> = Vec::new();
    for pos in 0..client_points.len() {
        if pos >= config.window {
            plan.push((UpdateOp::Insert, pos));
            plan.push((UpdateOp::Delete, pos - config.window));
        } else {
            plan.push((UpdateOp::Insert, pos));
        }
    }
    if let Some(cap) = config.max_updates {
        plan.truncate(cap);
    }

    let mut driver = Driver::new(config.algorithm, geometry, facility_count, config)?;
    let mut ids: Vec<Option<ClientId>> = vec![None; client_points.len()];
    let mut records = Vec::with_capacity(plan.len());
    let mut audits_passed = 0usize;
    let mut equivalence_checks = 0usize;
    let mut max_opt_ratio: Option<f64> = None;

    for (idx, &(op, pos)) in plan.iter().enumerate() {
        let started = Instant::now();
        match op {
            UpdateOp::Insert => {
                let point = client_points[order[pos]].clone();
                let id = instance.add_client_point(point)?;
                ids[pos] = Some(id);
                driver.insert(&mut instance, id)?;
            }
            UpdateOp::Delete => {
                let id = ids[pos].expect("window slides over inserted points");
                driver.delete(&mut instance, id)?;
            }
        }
        let usec = started.elapsed().as_micros() as u64;
        let (cost, client_recourse, facility_recourse, open) = driver.metrics(&instance);
        records.push(RunRecord {
            idx,
            op,
            cost,
            client_recourse,
            facility_recourse,
            open,
            usec,
        });

        if config.audit.triggers(idx) {
            if let Driver::Nice(state) = &driver {
                let report = audit(&instance, state);
                if !report.all_pass() {
                    return Err(HarnessError::AuditFailure {
                        update: idx,
                        detail: format!("{:?}", report.first_failure()),
                    });
                }
                audits_passed += 1;
                if config.epsilon == 1.0 && config.mu == 3 {
                    let certificate = build_dual(&instance, state)?;
                    let check = check_certificate(&instance, state, &certificate)?;
                    if !check.feasible {
                        return Err(HarnessError::AuditFailure {
                            update: idx,
                            detail: format!(
                                "dual certificate infeasible (primal {}, dual {})",
                                check.primal, check.dual_sum
                            ),
                        });
                    }
                }
                if config.track_opt_ratio && facility_count <= 20 {
                    let opt = exact_opt(&instance)?;
                    if opt.cost > 0.0 {
                        let ratio = state.solution_cost(&instance) / opt.cost;
                        max_opt_ratio =
                            Some(max_opt_ratio.map_or(ratio, |best: f64| best.max(ratio)));
                    }
                }
            }
        }
        if let (Some(limit), Driver::Nice(state)) = (config.equivalence_limit, &driver) {
            if state.assigned_count() <= limit {
                if !detector_equivalence(&instance, state)? {
                    return Err(HarnessError::AuditFailure {
                        update: idx,
                        detail: "detector disagrees with exhaustive blocking search".into(),
                    });
                }
                equivalence_checks += 1;
            }
        }
    }

    let ledger = match &driver {
        Driver::Nice(state) => Some(state.recourse().clone()),
        _ => None,
    };
    Ok(RunOutcome {
        records,
        ledger,
        max_opt_ratio,
        facility_count,
        opening_cost,
        audits_passed,
        equivalence_checks,
    })
}

enum Driver {
    Nice(Box<ClusteringState>),
    GreedyOff { previous: BaselineSolution, client_recourse: u64, facility_recourse: u64 },
    Nearest { previous: BaselineSolution, client_recourse: u64, facility_recourse: u64 },
}

impl Driver {
    fn new(
        algorithm: Algorithm,
        geometry: LevelGeometry,
        facility_count: usize,
        config: &RunConfig,
    ) -> Result<Self, HarnessError> {
        Ok(match algorithm {
            Algorithm::Nice => Driver::Nice(Box::new(ClusteringState::new(
                geometry,
                facility_count,
                config.insertion_policy,
            ))),
            Algorithm::GreedyOff => Driver::GreedyOff {
                previous: BaselineSolution::default(),
                client_recourse: 0,
                facility_recourse: 0,
            },
            Algorithm::Nearest => Driver::Nearest {
                previous: BaselineSolution::default(),
                client_recourse: 0,
                facility_recourse: 0,
            },
        })
    }

    fn insert(&mut self, instance: &mut MetricInstance, id: ClientId) -> Result<(), HarnessError> {
        match self {
            Driver::Nice(state) => state.insert(instance, id)?,
            _ => self.resolve(instance)?,
        }
        Ok(())
    }

    fn delete(&mut self, instance: &mut MetricInstance, id: ClientId) -> Result<(), HarnessError> {
        match self {
            Driver::Nice(state) => {
                state.delete(instance, id)?;
                instance.deactivate_client(id)?;
            }
            _ => {
                instance.deactivate_client(id)?;
                self.resolve(instance)?;
            }
        }
        Ok(())
    }

    /// Recomputes an offline baseline after an instance change and charges
    /// recourse by diffing against the previous solution.
    fn resolve(&mut self, instance: &MetricInstance) -> Result<(), HarnessError> {
        let (previous, client_recourse, facility_recourse, solution) = match self {
            Driver::GreedyOff { previous, client_recourse, facility_recourse } => {
                let solution = static_greedy(instance)?;
                (previous, client_recourse, facility_recourse, solution)
            }
            Driver::Nearest { previous, client_recourse, facility_recourse } => {
                let solution = nearest_facility(instance)?;
                (previous, client_recourse, facility_recourse, solution)
            }
            Driver::Nice(_) => unreachable!("resolve is for offline baselines"),
        };
        for (j, facility) in &solution.assignment {
            if previous.assignment.get(j) != Some(facility) {
                *client_recourse += 1;
            }
        }
        *facility_recourse +=
            solution.open.symmetric_difference(&previous.open).count() as u64;
        *previous = solution;
        Ok(())
    }

    fn metrics(&self, instance: &MetricInstance) -> (f64, u64, u64, usize) {
        match self {
            Driver::Nice(state) => {
                let ledger = state.recourse();
                (
                    state.solution_cost(instance),
                    ledger.client_recourse,
                    ledger.facility_recourse,
                    state.open_facilities().len(),
                )
            }
            Driver::GreedyOff { previous, client_recourse, facility_recourse }
            | Driver::Nearest { previous, client_recourse, facility_recourse } => {
                (previous.cost, *client_recourse, *facility_recourse, previous.open.len())
            }
        }
    }
}
