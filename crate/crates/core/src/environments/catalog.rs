use nalgebra::DMatrix;

use super::{Env, FiniteMdp, NonlinearGaussianEnv};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
}

const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "chain2",
        description: "2 states, 2 actions, H = 2; action 0 moves to the rewarding state",
    },
    CatalogEntry {
        name: "riverswim6",
        description: "6-state RiverSwim, H = 10, stochastic upstream moves",
    },
    CatalogEntry {
        name: "gridworld4x4",
        description: "16 cells, 4 moves with 10% slip, goal in the far corner, H = 8",
    },
    CatalogEntry {
        name: "nlds2d",
        description: "2-d tanh dynamics with Gaussian noise, 5 push actions, H = 10",
    },
];

pub fn standard_envs() -> &'static [CatalogEntry] {
    CATALOG
}

pub fn make_env(name: &str) -> Result<Env> {
    match name {
        "chain2" => chain2().map(Env::from),
        "riverswim6" => riverswim6().map(Env::from),
        "gridworld4x4" => gridworld4x4().map(Env::from),
        "nlds2d" => nlds2d().map(Env::from),
        _ => Err(Error::UnknownEnvironment {
            name: name.to_string(),
            catalog: CATALOG.iter().map(|e| e.name.to_string()).collect(),
        }),
    }
}

fn unit(i: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn chain2() -> Result<FiniteMdp> {
    // action 0 = go, action 1 = stay; state 1 is absorbing under both.
    let p = vec![vec![unit(1, 2), unit(0, 2)], vec![unit(1, 2), unit(1, 2)]];
    let r = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    FiniteMdp::new("chain2", 2, 0, p, r)
}

fn riverswim6() -> Result<FiniteMdp> {
    const N: usize = 6;
    let mut p = Vec::with_capacity(N);
    let mut r = Vec::with_capacity(N);
    for s in 0..N {
        let left = unit(s.saturating_sub(1), N);
        let mut right = vec![0.0; N];
        if s == 0 {
            right[0] = 0.4;
            right[1] = 0.6;
        } else if s == N - 1 {
            right[N - 2] = 0.4;
            right[N - 1] = 0.6;
        } else {
            right[s - 1] = 0.05;
            right[s] = 0.6;
            right[s + 1] = 0.35;
        }
        p.push(vec![left, right]);
        r.push(vec![
            if s == 0 { 0.005 } else { 0.0 },
            if s == N - 1 { 1.0 } else { 0.0 },
        ]);
    }
    FiniteMdp::new("riverswim6", 10, 0, p, r)
}

fn gridworld4x4() -> Result<FiniteMdp> {
    const W: usize = 4;
    const N: usize = W * W;
    const GOAL: usize = N - 1;
    const SLIP: f64 = 0.1;
    // up, right, down, left; walls leave the agent in place
    let moved = |s: usize, dir: usize| -> usize {
        let (r, c) = (s / W, s % W);
        match dir {
            0 if r > 0 => s - W,
            1 if c + 1 < W => s + 1,
            2 if r + 1 < W => s + W,
            3 if c > 0 => s - 1,
            _ => s,
        }
    };
    let mut p = Vec::with_capacity(N);
    let mut r = Vec::with_capacity(N);
    for s in 0..N {
        let mut rows = Vec::with_capacity(4);
        for a in 0..4 {
            let mut row = vec![0.0; N];
            if s == GOAL {
                row[GOAL] = 1.0;
            } else {
                row[moved(s, a)] += 1.0 - SLIP;
                for d in 0..4 {
                    row[moved(s, d)] += SLIP / 4.0;
                }
            }
            rows.push(row);
        }
        p.push(rows);
        r.push(vec![if s == GOAL { 1.0 } else { 0.0 }; 4]);
    }
    FiniteMdp::new("gridworld4x4", 8, 0, p, r)
}

fn nlds2d() -> Result<NonlinearGaussianEnv> {
    let push = 0.25;
    let actions = vec![
        vec![0.0, 0.0],
        vec![push, 0.0],
        vec![-push, 0.0],
        vec![0.0, push],
        vec![0.0, -push],
    ];
    #[rustfmt::skip]
    let weights = DMatrix::from_row_slice(2, 4, &[
        0.9, 0.0, 1.0, 0.0,
        0.0, 0.9, 0.0, 1.0,
    ]);
    NonlinearGaussianEnv::new(
        "nlds2d",
        10,
        actions,
        weights,
        0.1,
        vec![0.0, 0.0],
        (-2.0, 2.0),
        vec![0.8, 0.8],
        0.5,
    )
}
