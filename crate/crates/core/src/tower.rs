//! Kakutani towers and the Lévy-walk tower.
//!
//! A tower over a base map `S` with height `φ` lives on
//! `{(x, k) : 0 ≤ k ≤ φ(x)}` and moves by `(x, k) ↦ (x, k − 1)` for `k ≥ 1`
//! and `(x, 0) ↦ (S x, φ(S x))`.
//!
//! For the Lévy tower the base is a product of two full-branched linear
//! Markov maps, `S_B` with cells `B_i` of mass `p_i ∝ i^{-(β+1)}` and `S_C`
//! with finitely many cells `C_j`, and `φ = i − 1` on `B_i × [0, 1)`. Such
//! maps are expanding, so iterating them in floating point discards one
//! cell's worth of bits per step. A base point is therefore kept as its
//! current cells plus a private stream that produces the remaining digits of
//! its coordinates on demand; under Lebesgue measure those digits are
//! independent of the past itinerary, which is exactly what the stream
//! supplies.

use std::fmt::Debug;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::Dynamics;
use crate::numeric::{power_tail, zeta, CompensatedSum};
use crate::observables::{unit_phase, Site, TowerObservable};
use crate::rng::{self, StreamRng};

/// Base of a tower.
pub trait BaseSystem: Sync {
    type Point: Clone + Send + Debug;

    fn step(&self, x: &Self::Point) -> Result<Self::Point>;

    /// `φ(x)`.
    fn height(&self, x: &Self::Point) -> u64;

    /// A real coordinate used when a tower point is shown as a [`Site`].
    fn coordinate(&self, x: &Self::Point) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerPoint<P> {
    pub base: P,
    pub level: u64,
}

#[derive(Debug, Clone)]
pub struct Tower<B> {
    base: B,
}

impl<B: BaseSystem> Tower<B> {
    pub fn new(base: B) -> Self {
        Self { base }
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn point(&self, base: B::Point, level: u64) -> Result<TowerPoint<B::Point>> {
        let h = self.base.height(&base);
        if level > h {
            return Err(Error::invalid(format!("level {level} exceeds height {h}")));
        }
        Ok(TowerPoint { base, level })
    }

    /// Membership in the tower: `k ≤ φ(x)`.
    pub fn contains(&self, p: &TowerPoint<B::Point>) -> bool {
        p.level <= self.base.height(&p.base)
    }

    pub fn tower_step(&self, p: &TowerPoint<B::Point>) -> Result<TowerPoint<B::Point>> {
        if p.level >= 1 {
            return Ok(TowerPoint {
                base: p.base.clone(),
                level: p.level - 1,
            });
        }
        let base = self.base.step(&p.base)?;
        let level = self.base.height(&base);
        Ok(TowerPoint { base, level })
    }
}

impl<B: BaseSystem> Dynamics for Tower<B> {
    type State = TowerPoint<B::Point>;

    fn step(&self, p: &Self::State) -> Result<Self::State> {
        self.tower_step(p)
    }

    fn site(&self, p: &Self::State) -> Site {
        Site::leveled(self.base.coordinate(&p.base), p.level)
    }

    fn name(&self) -> String {
        "tower".into()
    }
}

/// Full-branched increasing linear Markov map on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovMap {
    /// `0 = s_0 < s_1 < … < s_n = 1`.
    bounds: Vec<f64>,
}

impl MarkovMap {
    pub fn new(lengths: &[f64]) -> Result<Self> {
        if lengths.is_empty() || lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("Markov cell lengths must be positive"));
        }
        let total: f64 = lengths.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain("MarkovMap::new", total, "cell lengths summing to 1"));
        }
        let mut bounds = Vec::with_capacity(lengths.len() + 1);
        let mut acc = CompensatedSum::new();
        bounds.push(0.0);
        for &l in &lengths[..lengths.len() - 1] {
            acc.add(l);
            bounds.push(acc.value());
        }
        bounds.push(1.0);
        Ok(Self { bounds })
    }

    pub fn equal(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::invalid("at least one cell"));
        }
        Self::new(&vec![1.0 / cells as f64; cells])
    }

    pub fn cells(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn length(&self, i: usize) -> f64 {
        self.bounds[i + 1] - self.bounds[i]
    }

    /// Index of the cell `[s_i, s_{i+1})` containing `y`.
    pub fn cell(&self, y: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&y) {
            return Err(Error::domain("MarkovMap", y, "[0, 1)"));
        }
        Ok(self.bounds.partition_point(|&s| s <= y) - 1)
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        let i = self.cell(y)?;
        let v = (y - self.bounds[i]) / self.length(i);
        Ok(v.min(1.0 - f64::EPSILON / 2.0))
    }
}

/// A tower over a finite Markov map with a height per cell, iterated on
/// real coordinates.
#[derive(Debug, Clone)]
pub struct MarkovBase {
    pub map: MarkovMap,
    pub heights: Vec<u64>,
}

impl MarkovBase {
    pub fn new(map: MarkovMap, heights: Vec<u64>) -> Result<Self> {
        if heights.len() != map.cells() {
            return Err(Error::invalid("one height per Markov cell"));
        }
        Ok(Self { map, heights })
    }
}

impl BaseSystem for MarkovBase {
    type Point = f64;

    fn step(&self, x: &f64) -> Result<f64> {
        self.map.eval(*x)
    }

    fn height(&self, x: &f64) -> u64 {
        self.heights[self.map.cell(*x).expect("base point in [0, 1)")]
    }

    fn coordinate(&self, x: &f64) -> f64 {
        *x
    }
}

/// Directions of the walk: finitely many rays on the cells of `S_C`, or a
/// uniformly distributed angle.
#[derive(Debug, Clone)]
pub enum Rays {
    Finite { cells: MarkovMap, gammas: Vec<Complex64> },
    Radial,
}

/// Second coordinate of a Lévy-tower base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ray {
    Cell(usize),
    /// Angle as a fraction of a full turn.
    Angle(f64),
}

/// A base point: its `B` cell, its ray, and the stream holding the digits
/// not yet read.
#[derive(Debug, Clone)]
pub struct LevyPoint {
    pub b_cell: u64,
    pub ray: Ray,
    digits: StreamRng,
}

impl PartialEq for LevyPoint {
    fn eq(&self, other: &Self) -> bool {
        self.b_cell == other.b_cell && self.ray == other.ray
    }
}

/// Cells below this index use a table of tail masses.
const TAIL_TABLE: u64 = 4096;

/// The Lévy-walk tower.
#[derive(Debug, Clone)]
pub struct LevyTower {
    beta: f64,
    zeta: f64,
    rays: Rays,
    /// `G(i) = P(I ≥ i)` for `i = 1..=TAIL_TABLE + 1`, at index `i − 1`.
    tails: Vec<f64>,
}

impl LevyTower {
    pub fn new(beta: f64, rays: Rays) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain("LevyTower", beta, "(0, 1)"));
        }
        if let Rays::Finite { cells, gammas } = &rays {
            if cells.cells() != gammas.len() {
                return Err(Error::invalid("one ray value per C cell"));
            }
            if gammas.iter().any(|g| (g.norm() - 1.0).abs() > 1e-12) {
                return Err(Error::invalid("ray values must have modulus one"));
            }
        }
        let s = beta + 1.0;
        let z = zeta(s);
        let mut tails = vec![0.0; TAIL_TABLE as usize + 1];
        let mut tail = power_tail(s, TAIL_TABLE + 1);
        tails[TAIL_TABLE as usize] = tail / z;
        for i in (1..=TAIL_TABLE).rev() {
            tail += (i as f64).powf(-s);
            tails[i as usize - 1] = tail / z;
        }
        tails[0] = 1.0;
        Ok(Self {
            beta,
            zeta: z,
            rays,
            tails,
        })
    }

    /// Two equal `C` cells with rays `−1` and `+1`.
    pub fn symmetric(beta: f64) -> Result<Self> {
        Self::new(
            beta,
            Rays::Finite {
                cells: MarkovMap::equal(2)?,
                gammas: vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)],
            },
        )
    }

    /// Equal `C` cells with rays at the `n`-th roots of unity.
    pub fn rays_of_unity(beta: f64, n: usize) -> Result<Self> {
        Self::new(
            beta,
            Rays::Finite {
                cells: MarkovMap::equal(n)?,
                gammas: (0..n).map(|j| unit_phase(j as f64 / n as f64)).collect(),
            },
        )
    }

    pub fn radial(beta: f64) -> Result<Self> {
        Self::new(beta, Rays::Radial)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `ζ(β + 1)`, the normalisation of the `B` masses.
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn rays(&self) -> &Rays {
        &self.rays
    }

    /// `p_i = i^{-(β+1)} / ζ(β+1)`.
    pub fn cell_mass(&self, i: u64) -> f64 {
        (i as f64).powf(-(self.beta + 1.0)) / self.zeta
    }

    /// `P(I ≥ i)`.
    pub fn tail_mass(&self, i: u64) -> f64 {
        match i {
            0 => 1.0,
            i if i <= TAIL_TABLE + 1 => self.tails[i as usize - 1],
            i => power_tail(self.beta + 1.0, i) / self.zeta,
        }
    }

    /// The cell `i` with `G(i + 1) < w ≤ G(i)`, for `w ∈ (0, 1]`.
    pub fn b_cell_of_tail(&self, w: f64) -> u64 {
        let table_floor = self.tails[TAIL_TABLE as usize];
        if w > table_floor {
            // tails is decreasing; count entries ≥ w
            return self.tails.partition_point(|&g| g >= w) as u64;
        }
        let guess = (w * self.beta * self.zeta).powf(-1.0 / self.beta);
        if guess >= 4.0e15 {
            return if guess >= u64::MAX as f64 { u64::MAX } else { guess as u64 };
        }
        let mut i = (guess as u64).max(TAIL_TABLE + 1);
        while i > TAIL_TABLE + 1 && self.tail_mass(i) < w {
            i -= 1;
        }
        while self.tail_mass(i + 1) >= w {
            i += 1;
        }
        i
    }

    /// Cell of `y ∈ [0, 1)` under the `B` partition, `B_1` leftmost.
    pub fn b_cell(&self, y: f64) -> Result<u64> {
        if !(0.0..1.0).contains(&y) {
            return Err(Error::domain("LevyTower::b_cell", y, "[0, 1)"));
        }
        Ok(self.b_cell_of_tail(1.0 - y))
    }

    fn draw_ray(&self, r: &mut StreamRng) -> Ray {
        match &self.rays {
            Rays::Finite { cells, .. } => Ray::Cell(cells.cell(r.gen()).expect("uniform draw in [0, 1)")),
            Rays::Radial => Ray::Angle(r.gen()),
        }
    }

    /// A Lebesgue-distributed base point whose digits come from `digits`.
    pub fn base_point(&self, mut digits: StreamRng) -> LevyPoint {
        let b_cell = self.b_cell_of_tail(rng::open_closed(&mut digits));
        let ray = self.draw_ray(&mut digits);
        LevyPoint { b_cell, ray, digits }
    }

    /// `γ` of a base point.
    pub fn direction(&self, ray: Ray) -> Complex64 {
        match (ray, &self.rays) {
            (Ray::Cell(j), Rays::Finite { gammas, .. }) => gammas[j],
            (Ray::Angle(theta), _) => unit_phase(theta),
            (Ray::Cell(_), Rays::Radial) => unreachable!("cell ray on a radial tower"),
        }
    }

    pub fn tower(&self) -> Tower<&LevyTower> {
        Tower::new(self)
    }
}

impl BaseSystem for &LevyTower {
    type Point = LevyPoint;

    fn step(&self, x: &LevyPoint) -> Result<LevyPoint> {
        let mut digits = x.digits.clone();
        let b_cell = self.b_cell_of_tail(rng::open_closed(&mut digits));
        let ray = self.draw_ray(&mut digits);
        Ok(LevyPoint { b_cell, ray, digits })
    }

    fn height(&self, x: &LevyPoint) -> u64 {
        x.b_cell - 1
    }

    fn coordinate(&self, x: &LevyPoint) -> f64 {
        x.b_cell as f64
    }
}

/// `f(x, k) = γ(x)` on every level.
#[derive(Debug, Clone, Copy)]
pub struct RayObservable<'a>(pub &'a LevyTower);

impl TowerObservable<LevyPoint> for RayObservable<'_> {
    fn eval_tower(&self, base: &LevyPoint, _level: u64) -> Complex64 {
        self.0.direction(base.ray)
    }
}

/// Position of a walk that moves one unit per step in the current
/// direction for `remaining` more steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkState {
    pub position: Complex64,
    pub remaining: u64,
    pub direction: Complex64,
}

impl WalkState {
    pub fn origin() -> Self {
        Self {
            position: Complex64::new(0.0, 0.0),
            remaining: 0,
            direction: Complex64::new(1.0, 0.0),
        }
    }

    /// Starts a flight of `duration` unit steps along `direction`.
    pub fn begin(&mut self, duration: u64, direction: Complex64) {
        self.remaining = duration;
        self.direction = direction;
    }

    /// Takes one unit step; `false` if the flight is already over.
    pub fn advance(&mut self) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.position += self.direction;
        self.remaining -= 1;
        true
    }
}

/// Walk position after `n` steps, with flights `(I_q, Γ_q)` consumed from
/// `flights` in order.
fn walk_with_flights<I>(n: u64, mut flights: I) -> Complex64
where
    I: FnMut() -> (u64, Complex64),
{
    let mut walk = WalkState::origin();
    let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
    for _ in 0..n {
        while walk.remaining == 0 {
            let (d, g) = flights();
            walk.begin(d, g);
        }
        let dir = walk.direction;
        walk.advance();
        re.add(dir.re);
        im.add(dir.im);
    }
    Complex64::new(re.value(), im.value())
}

/// `S_n f` of a walk whose flights `(I_q, Γ_q)` are drawn i.i.d. from the
/// product law `P(I = i, Γ = γ_j) = p_i · Leb(C_j)`.
pub fn walk_oracle(lt: &LevyTower, rng: &mut StreamRng, n: u64) -> Complex64 {
    walk_with_flights(n, || {
        let i = lt.b_cell_of_tail(rng::open_closed(rng));
        let ray = lt.draw_ray(rng);
        (i, lt.direction(ray))
    })
}

/// `S_n f` along the tower orbit of `(start, 0)`.
pub fn levy_tower_orbit(lt: &LevyTower, start: LevyPoint, n: u64) -> Result<Complex64> {
    let tower = lt.tower();
    let f = RayObservable(lt);
    crate::birkhoff::birkhoff_sum_with(&tower, |p| f.eval_tower(&p.base, p.level), TowerPoint { base: start, level: 0 }, n)
}

/// Outcome of [`matched_equivalence`].
#[derive(Debug, Clone, Copy)]
pub struct MatchedWalk {
    pub tower_sum: Complex64,
    pub walk_sum: Complex64,
    pub residual: f64,
    pub flights: usize,
}

/// Runs the tower orbit of `(start, 0)` for `n` steps, reads the flights
/// `(φ + 1, γ)` off its base itinerary, replays them as a walk, and compares
/// the two sums.
pub fn matched_equivalence(lt: &LevyTower, start: LevyPoint, n: u64) -> Result<MatchedWalk> {
    if n == 0 {
        let zero = Complex64::new(0.0, 0.0);
        return Ok(MatchedWalk {
            tower_sum: zero,
            walk_sum: zero,
            residual: 0.0,
            flights: 0,
        });
    }
    let tower = lt.tower();
    let f = RayObservable(lt);
    let first = lt.direction(start.ray);
    let mut itinerary = Vec::new();
    let mut p = TowerPoint { base: start, level: 0 };
    let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
    for k in 0..n {
        let v = f.eval_tower(&p.base, p.level);
        re.add(v.re);
        im.add(v.im);
        if k + 1 < n {
            let was_base = p.level == 0;
            p = tower.tower_step(&p)?;
            if was_base {
                itinerary.push((p.level + 1, lt.direction(p.base.ray)));
            }
        }
    }
    let tower_sum = Complex64::new(re.value(), im.value());
    let mut flights = itinerary.iter().copied();
    let walk_sum = first + walk_with_flights(n - 1, || flights.next().expect("itinerary covers the walk"));
    Ok(MatchedWalk {
        tower_sum,
        walk_sum,
        residual: (tower_sum - walk_sum).norm(),
        flights: itinerary.len(),
    })
}

/// `count` trajectories of `L_n(t) = S_{⌊nt⌋} f / n` on a sorted grid of
/// `t ≥ 0`, each started from a fresh base point drawn from stream `i`.
pub fn scaled_process(lt: &LevyTower, count: usize, n: u64, grid: &[f64], seed: u64) -> Result<Vec<Vec<Complex64>>> {
    if grid.iter().any(|&t| !(t >= 0.0)) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("time grid must be sorted and non-negative"));
    }
    let stops: Vec<u64> = grid.iter().map(|&t| (n as f64 * t).floor() as u64).collect();
    let horizon = stops.last().copied().unwrap_or(0);
    let scale = n as f64;
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let tower = lt.tower();
            let f = RayObservable(lt);
            let mut p = TowerPoint {
                base: lt.base_point(rng::stream(seed, i)),
                level: 0,
            };
            let (mut re, mut im) = (CompensatedSum::new(), CompensatedSum::new());
            let mut out = Vec::with_capacity(stops.len());
            let mut next = stops.iter().peekable();
            let mut done = 0u64;
            loop {
                while next.peek() == Some(&&done) {
                    next.next();
                    out.push(Complex64::new(re.value(), im.value()) / scale);
                }
                if done == horizon {
                    break;
                }
                let v = f.eval_tower(&p.base, p.level);
                re.add(v.re);
                im.add(v.im);
                done += 1;
                if done < horizon {
                    p = tower.tower_step(&p)?;
                }
            }
            Ok(out)
        })
        .collect()
}

/// Directions of `count` consecutive excursions of a radial tower.
pub fn radial_directions(lt: &LevyTower, count: usize, seed: u64) -> Vec<Complex64> {
    let tower_base = lt;
    let mut x = lt.base_point(rng::stream(seed, 0));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        x = BaseSystem::step(&tower_base, &x).expect("base step is total");
        out.push(lt.direction(x.ray));
    }
    out
}
