//! Study environments: a three-armed bandit and a 3x3 gridworld, each with
//! a two-mode expert, an enumerable deterministic policy class, and a
//! smooth cosine-score policy parameterization.
//!
//! Bandit: one state, actions (a, b, c), horizon 1. The expert plays a and
//! b with probability 1/2 each and never plays c. Candidate policies are
//! A = (1,0,0), B = (0,1,0), and the interpolating M = (e0, e0, 1-2*e0).
//!
//! Gridworld: cells indexed `y*3 + x` with y = 0 the bottom row; the agent
//! starts at bottom-middle (cell 1), the goal is top-middle (cell 7, made
//! absorbing), and the center (cell 4) is the undesirable region. The
//! expert mixes two deterministic routes around the center, left
//! `1-0-3-6-7` and right `1-2-5-8-7`, with weight 1/2 each; off-route
//! cells take the first step of the shortest center-avoiding path to the
//! goal. Control noise e1 swaps the commanded action for one of the other
//! three uniformly; transition noise e2 then replaces the successor with a
//! uniformly random grid neighbor of the current cell. Off-grid moves stay
//! in place.

use rand::Rng;

use crate::error::{FilabError, Result};
use crate::mdp::{FiniteMdp, TabularPolicy};

/// Sharpness of the cosine-score softmax policies.
pub const SHARPNESS: f64 = 2.5;

/// Default bandit control noise for policy M.
pub const DEFAULT_EPS0: f64 = 0.28;
/// Default gridworld control noise.
pub const DEFAULT_EPS1: f64 = 0.14;
/// Default gridworld transition noise.
pub const DEFAULT_EPS2: f64 = 0.15;
/// Default gridworld horizon.
pub const DEFAULT_HORIZON: usize = 8;

/// Grid action indices.
pub const UP: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;
/// Names matching the grid action indices.
pub const ACTION_NAMES: [&str; 4] = ["up", "right", "down", "left"];

/// Labels for the bandit candidate policies, in list order.
pub const BANDIT_POLICY_LABELS: [&str; 3] = ["A", "B", "M"];

/// Bandit parameters: the control noise of policy M and the fixed expert
/// action distribution.
#[derive(Debug, Clone)]
pub struct BanditSpec {
    pub epsilon0: f64,
    pub expert: [f64; 3],
}

impl BanditSpec {
    pub fn new(epsilon0: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&epsilon0) {
            return Err(FilabError::Input(format!(
                "bandit control noise must lie in [0, 0.5], got {epsilon0}"
            )));
        }
        Ok(Self {
            epsilon0,
            expert: [0.5, 0.5, 0.0],
        })
    }
}

/// Gridworld parameters. The 3x3 layout (start, terminal, center) is
/// fixed; noise levels and horizon vary.
#[derive(Debug, Clone)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    pub start_cell: usize,
    pub terminal_cell: usize,
    pub center_cell: usize,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub horizon: usize,
}

impl GridWorldSpec {
    /// 3x3 layout with start 1, terminal 7, center 4. Noises must lie in
    /// `[0, 1)`; the horizon must cover the four-step around-center routes.
    pub fn new(epsilon1: f64, epsilon2: f64, horizon: usize) -> Result<Self> {
        for (name, e) in [("control noise", epsilon1), ("transition noise", epsilon2)] {
            if !(0.0..1.0).contains(&e) {
                return Err(FilabError::Input(format!(
                    "{name} must lie in [0, 1), got {e}"
                )));
            }
        }
        if horizon < 4 {
            return Err(FilabError::Input(format!(
                "horizon must be at least 4 (shortest route length), got {horizon}"
            )));
        }
        Ok(Self {
            width: 3,
            height: 3,
            start_cell: 1,
            terminal_cell: 7,
            center_cell: 4,
            epsilon1,
            epsilon2,
            horizon,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_xy(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn cell_index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Noise-free successor of `cell` under a grid action; off-grid moves
    /// stay in place. The terminal cell absorbs every action.
    pub fn step_cell(&self, cell: usize, action: usize) -> usize {
        if cell == self.terminal_cell {
            return cell;
        }
        let (x, y) = self.cell_xy(cell);
        let (nx, ny) = match action {
            UP => (x as isize, y as isize + 1),
            RIGHT => (x as isize + 1, y as isize),
            DOWN => (x as isize, y as isize - 1),
            LEFT => (x as isize - 1, y as isize),
            other => panic!("grid action out of range: {other}"),
        };
        if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
            cell
        } else {
            self.cell_index(nx as usize, ny as usize)
        }
    }

    /// On-grid neighbors of `cell` (excluding the cell itself).
    pub fn neighbors(&self, cell: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(4);
        for a in 0..4 {
            let n = {
                // Geometric adjacency, ignoring the terminal absorption rule.
                let (x, y) = self.cell_xy(cell);
                let (nx, ny) = match a {
                    UP => (x as isize, y as isize + 1),
                    RIGHT => (x as isize + 1, y as isize),
                    DOWN => (x as isize, y as isize - 1),
                    _ => (x as isize - 1, y as isize),
                };
                if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                    cell
                } else {
                    self.cell_index(nx as usize, ny as usize)
                }
            };
            if n != cell && !out.contains(&n) {
                out.push(n);
            }
        }
        out
    }

    /// Reflection across the vertical axis: `x` maps to `width-1-x`.
    pub fn mirror_cell(&self, cell: usize) -> usize {
        let (x, y) = self.cell_xy(cell);
        self.cell_index(self.width - 1 - x, y)
    }

    /// Action counterpart of [`Self::mirror_cell`]: left and right swap.
    pub fn mirror_action(&self, action: usize) -> usize {
        match action {
            RIGHT => LEFT,
            LEFT => RIGHT,
            other => other,
        }
    }
}

/// One demonstrator mode: a label, its mixture weight, and what the mode
/// does (one action for the bandit, a full state route for the grid).
#[derive(Debug, Clone)]
pub struct ExpertMode {
    pub label: &'static str,
    pub weight: f64,
    pub route: ModeRoute,
}

/// The shape of a mode's behavior.
#[derive(Debug, Clone)]
pub enum ModeRoute {
    /// A bandit mode plays this single action.
    Action(usize),
    /// A grid mode follows this state sequence from start to terminal.
    States(Vec<usize>),
}

/// Queryable expert: a tabular policy plus descriptors of its modes.
#[derive(Debug, Clone)]
pub struct ExpertModel {
    pub policy: TabularPolicy,
    pub modes: Vec<ExpertMode>,
}

impl ExpertModel {
    /// The expert's action distribution at a state.
    pub fn query(&self, state: usize) -> &[f64] {
        self.policy.row(state)
    }
}

/// Which environment a bundle wraps, with its parameters.
#[derive(Debug, Clone)]
pub enum EnvKind {
    Bandit(BanditSpec),
    Grid(GridWorldSpec),
}

/// An environment ready for training or analysis: dynamics, expert, kind.
#[derive(Debug, Clone)]
pub struct EnvBundle {
    pub mdp: FiniteMdp,
    pub expert: ExpertModel,
    pub kind: EnvKind,
}

impl EnvBundle {
    /// A freshly initialized parametric policy of the matching kind, with
    /// every angle drawn uniformly from `[-pi, pi]`.
    pub fn fresh_policy<R: Rng + ?Sized>(&self, rng: &mut R) -> ParametricPolicy {
        let n_params = match self.kind {
            EnvKind::Bandit(_) => 1,
            EnvKind::Grid(_) => self.mdp.n_states(),
        };
        let theta: Vec<f64> = (0..n_params)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        match self.kind {
            EnvKind::Bandit(_) => bandit_policy_from_theta(theta[0]),
            EnvKind::Grid(_) => {
                grid_policy_from_theta(&theta).expect("freshly drawn angles are finite")
            }
        }
    }
}

/// Builds the three-armed bandit: a one-state, three-action, one-step MDP,
/// the (1/2, 1/2, 0) expert, and the candidate policies `[A, B, M]` with
/// `M = (e0, e0, 1-2*e0)`.
pub fn make_bandit(epsilon0: f64) -> Result<(EnvBundle, Vec<TabularPolicy>)> {
    let spec = BanditSpec::new(epsilon0)?;
    let mdp = FiniteMdp::new(1, 3, 1, vec![1.0], vec![1.0, 1.0, 1.0])?;
    let expert_policy = TabularPolicy::new(1, 3, spec.expert.to_vec())?;
    let candidates = vec![
        TabularPolicy::new(1, 3, vec![1.0, 0.0, 0.0])?,
        TabularPolicy::new(1, 3, vec![0.0, 1.0, 0.0])?,
        TabularPolicy::new(1, 3, vec![epsilon0, epsilon0, 1.0 - 2.0 * epsilon0])?,
    ];
    let expert = ExpertModel {
        policy: expert_policy,
        modes: vec![
            ExpertMode {
                label: "a",
                weight: 0.5,
                route: ModeRoute::Action(0),
            },
            ExpertMode {
                label: "b",
                weight: 0.5,
                route: ModeRoute::Action(1),
            },
        ],
    };
    Ok((
        EnvBundle {
            mdp,
            expert,
            kind: EnvKind::Bandit(spec),
        },
        candidates,
    ))
}

/// The grid expert's action row at each cell: 50/50 between the two route
/// actions at the start, the route action on route cells, and the first
/// step of the center-avoiding shortest path to the goal elsewhere.
fn grid_expert_rows(spec: &GridWorldSpec) -> Vec<f64> {
    let mut rows = vec![0.0; spec.n_cells() * 4];
    let mut set = |s: usize, pairs: &[(usize, f64)]| {
        for &(a, p) in pairs {
            rows[s * 4 + a] = p;
        }
    };
    set(0, &[(UP, 1.0)]);
    set(1, &[(RIGHT, 0.5), (LEFT, 0.5)]);
    set(2, &[(UP, 1.0)]);
    set(3, &[(UP, 1.0)]);
    // Center: straight up reaches the goal in one step without re-entering
    // the center.
    set(4, &[(UP, 1.0)]);
    set(5, &[(UP, 1.0)]);
    set(6, &[(RIGHT, 1.0)]);
    // Terminal is absorbing, so the row is unobservable; a fixed "up" keeps
    // the expert a valid policy everywhere.
    set(7, &[(UP, 1.0)]);
    set(8, &[(LEFT, 1.0)]);
    rows
}

/// Builds the 3x3 gridworld MDP with the two-route expert and the
/// descriptor of the `4^9` deterministic policy class.
pub fn make_gridworld(
    epsilon1: f64,
    epsilon2: f64,
    horizon: usize,
) -> Result<(EnvBundle, DeterministicPolicyClass)> {
    let spec = GridWorldSpec::new(epsilon1, epsilon2, horizon)?;
    let ns = spec.n_cells();
    let na = 4;
    let mut transition = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
            if s == spec.terminal_cell {
                row[s] = 1.0;
                continue;
            }
            // Control noise: the commanded action survives with probability
            // 1-e1, otherwise one of the other three executes.
            for e in 0..na {
                let p_ctrl = if e == a {
                    1.0 - spec.epsilon1
                } else {
                    spec.epsilon1 / 3.0
                };
                row[spec.step_cell(s, e)] += (1.0 - spec.epsilon2) * p_ctrl;
            }
            // Transition noise: slip to a uniformly random grid neighbor.
            let nbrs = spec.neighbors(s);
            for &n in &nbrs {
                row[n] += spec.epsilon2 / nbrs.len() as f64;
            }
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    let mut initial = vec![0.0; ns];
    initial[spec.start_cell] = 1.0;
    let mdp = FiniteMdp::new(ns, na, horizon, initial, transition)?;
    let expert = ExpertModel {
        policy: TabularPolicy::new(ns, na, grid_expert_rows(&spec))?,
        modes: vec![
            ExpertMode {
                label: "left",
                weight: 0.5,
                route: ModeRoute::States(vec![1, 0, 3, 6, 7]),
            },
            ExpertMode {
                label: "right",
                weight: 0.5,
                route: ModeRoute::States(vec![1, 2, 5, 8, 7]),
            },
        ],
    };
    let class = DeterministicPolicyClass {
        n_states: ns,
        n_actions: na,
    };
    Ok((
        EnvBundle {
            mdp,
            expert,
            kind: EnvKind::Grid(spec),
        },
        class,
    ))
}

/// The class of all deterministic action assignments over a finite state
/// space, indexed by base-`n_actions` encoding: digit `s` of a policy id is
/// the action taken at state `s`.
#[derive(Debug, Clone, Copy)]
pub struct DeterministicPolicyClass {
    pub n_states: usize,
    pub n_actions: usize,
}

impl DeterministicPolicyClass {
    /// `n_actions ^ n_states`.
    pub fn size(&self) -> usize {
        self.n_actions.pow(self.n_states as u32)
    }

    /// Action taken at `state` by policy `id`.
    pub fn action(&self, id: usize, state: usize) -> usize {
        (id / self.n_actions.pow(state as u32)) % self.n_actions
    }

    /// Materializes policy `id` as a tabular policy.
    pub fn policy(&self, id: usize) -> TabularPolicy {
        let mut probs = vec![0.0; self.n_states * self.n_actions];
        for s in 0..self.n_states {
            probs[s * self.n_actions + self.action(id, s)] = 1.0;
        }
        TabularPolicy::new(self.n_states, self.n_actions, probs)
            .expect("indicator rows are valid distributions")
    }

    /// Id of the left-right mirror image of policy `id` on the 3x3 grid:
    /// the mirrored policy takes the mirrored action at the mirrored cell.
    /// Only meaningful for the 9-state, 4-action grid class.
    pub fn mirror_id(&self, id: usize, spec: &GridWorldSpec) -> usize {
        debug_assert_eq!(self.n_states, spec.n_cells());
        debug_assert_eq!(self.n_actions, 4);
        let mut out = 0;
        for s in 0..self.n_states {
            let a = self.action(id, s);
            out += spec.mirror_action(a) * self.n_actions.pow(spec.mirror_cell(s) as u32);
        }
        out
    }
}

/// Smooth policy over the bandit or grid: per-state cosine scores
/// `V_a = cos(angle_a - theta)` pushed through `softmax(A * (V + 1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricPolicy {
    kind: ParamKind,
    theta: Vec<f64>,
}

/// Which cosine-score family a [`ParametricPolicy`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// One state, three actions, a single angle:
    /// `V = [cos(-t - pi/4), cos(t), cos(-t + pi/4)]`.
    Bandit,
    /// One angle per cell, four actions at offsets
    /// `(0, pi/2, pi, -pi/2)` for (up, right, down, left).
    Grid,
}

/// Grid action angle offsets, indexed like the action constants.
const GRID_ANGLES: [f64; 4] = [
    0.0,
    std::f64::consts::FRAC_PI_2,
    std::f64::consts::PI,
    -std::f64::consts::FRAC_PI_2,
];

/// The bandit cosine score triple `[cos(-t - pi/4), cos(t), cos(-t + pi/4)]`.
pub fn bandit_cosines(theta: f64) -> [f64; 3] {
    [
        (-theta - std::f64::consts::FRAC_PI_4).cos(),
        theta.cos(),
        (-theta + std::f64::consts::FRAC_PI_4).cos(),
    ]
}

/// Derivative of [`bandit_cosines`] with respect to `theta`.
pub fn bandit_cosine_grads(theta: f64) -> [f64; 3] {
    // V_a = cos(u_a) with u = (-t - pi/4, t, -t + pi/4), so
    // dV_a/dt = -sin(u_a) * du_a/dt with du/dt = (-1, 1, -1).
    [
        (-theta - std::f64::consts::FRAC_PI_4).sin(),
        -theta.sin(),
        (-theta + std::f64::consts::FRAC_PI_4).sin(),
    ]
}

/// The grid cosine score quadruple `cos(angle_a - theta)` over
/// (up, right, down, left).
pub fn grid_cosines(theta: f64) -> [f64; 4] {
    [
        (GRID_ANGLES[0] - theta).cos(),
        (GRID_ANGLES[1] - theta).cos(),
        (GRID_ANGLES[2] - theta).cos(),
        (GRID_ANGLES[3] - theta).cos(),
    ]
}

/// Derivative of [`grid_cosines`] with respect to `theta`.
pub fn grid_cosine_grads(theta: f64) -> [f64; 4] {
    [
        (GRID_ANGLES[0] - theta).sin(),
        (GRID_ANGLES[1] - theta).sin(),
        (GRID_ANGLES[2] - theta).sin(),
        (GRID_ANGLES[3] - theta).sin(),
    ]
}

/// Bandit policy at angle `theta`.
pub fn bandit_policy_from_theta(theta: f64) -> ParametricPolicy {
    ParametricPolicy {
        kind: ParamKind::Bandit,
        theta: vec![theta],
    }
}

/// Grid policy from one angle per cell. Angles must be finite.
pub fn grid_policy_from_theta(theta: &[f64]) -> Result<ParametricPolicy> {
    if theta.is_empty() {
        return Err(FilabError::Input("grid policy needs at least one angle".into()));
    }
    if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
        return Err(FilabError::Input(format!(
            "grid policy angles must be finite, got {bad}"
        )));
    }
    Ok(ParametricPolicy {
        kind: ParamKind::Grid,
        theta: theta.to_vec(),
    })
}

impl ParametricPolicy {
    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    pub fn n_states(&self) -> usize {
        match self.kind {
            ParamKind::Bandit => 1,
            ParamKind::Grid => self.theta.len(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self.kind {
            ParamKind::Bandit => 3,
            ParamKind::Grid => 4,
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Raw cosine scores `V_a` at a state.
    fn scores(&self, state: usize) -> Vec<f64> {
        match self.kind {
            ParamKind::Bandit => bandit_cosines(self.theta[0]).to_vec(),
            ParamKind::Grid => grid_cosines(self.theta[state]).to_vec(),
        }
    }

    /// `dV_a / d theta_state` for every action.
    fn score_grads(&self, state: usize) -> Vec<f64> {
        match self.kind {
            ParamKind::Bandit => bandit_cosine_grads(self.theta[0]).to_vec(),
            ParamKind::Grid => grid_cosine_grads(self.theta[state]).to_vec(),
        }
    }

    /// Action distribution `softmax(A * (V + 1))` at a state.
    pub fn action_probs(&self, state: usize) -> Vec<f64> {
        let scores = self.scores(state);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut exps: Vec<f64> = scores
            .iter()
            .map(|v| (SHARPNESS * (v + 1.0) - SHARPNESS * (max + 1.0)).exp())
            .collect();
        let z: f64 = exps.iter().sum();
        for e in &mut exps {
            *e /= z;
        }
        exps
    }

    /// Adds `scale * d log pi(a|s) / d theta` into `grad` (one entry per
    /// parameter; for the grid only the state's own angle is touched).
    pub fn accumulate_grad_log_prob(
        &self,
        state: usize,
        action: usize,
        scale: f64,
        grad: &mut [f64],
    ) {
        debug_assert_eq!(grad.len(), self.theta.len());
        let probs = self.action_probs(state);
        let dv = self.score_grads(state);
        let mean_dv: f64 = probs.iter().zip(&dv).map(|(p, d)| p * d).sum();
        let g = SHARPNESS * (dv[action] - mean_dv);
        match self.kind {
            ParamKind::Bandit => grad[0] += scale * g,
            ParamKind::Grid => grad[state] += scale * g,
        }
    }

    /// Snapshot as a tabular policy (for exact occupancy computations).
    pub fn to_tabular(&self) -> TabularPolicy {
        let ns = self.n_states();
        let na = self.n_actions();
        let mut probs = Vec::with_capacity(ns * na);
        for s in 0..ns {
            probs.extend(self.action_probs(s));
        }
        TabularPolicy::new(ns, na, probs).expect("softmax rows are valid distributions")
    }
}
