//! Planar granular lattice: unit cells in one-sided Hertzian contact on a
//! fixed square-grid neighbor list, each tethered to its rest site.
//!
//! Particle `i` sits at column `i % width`, row `i / width`, counted from the
//! bottom-left corner.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::signal;

pub type Vec2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StiffnessClass {
    Soft,
    Stiff,
}

impl From<u8> for StiffnessClass {
    fn from(bit: u8) -> Self {
        if bit == 0 {
            StiffnessClass::Soft
        } else {
            StiffnessClass::Stiff
        }
    }
}

/// The evolvable material: lattice shape, a stiffness bit per particle and
/// the three designated particles.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub width: usize,
    pub height: usize,
    /// One entry per particle, 0 = soft, 1 = stiff.
    pub types: Vec<u8>,
    pub input_particles: [usize; 2],
    pub output_particle: usize,
}

impl Genome {
    /// All-soft genome with the given designations.
    pub fn uniform(
        width: usize,
        height: usize,
        input_particles: [usize; 2],
        output_particle: usize,
    ) -> Self {
        Genome {
            width,
            height,
            types: vec![0; width * height],
            input_particles,
            output_particle,
        }
    }

    /// Default 30-particle template: 6 columns by 5 rows. One input on the
    /// left edge and one on the bottom edge, both in line with the interior
    /// output at (2, 2).
    pub fn default_template() -> Self {
        Genome::uniform(6, 5, [12, 2], 14)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class(&self, i: usize) -> StiffnessClass {
        StiffnessClass::from(self.types[i])
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Shape and class bits only; enough to build a lattice.
    pub fn validate_shape(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.width == 0 || self.height == 0 {
            return Err(Error::config(
                "genome.width",
                "width and height must be >= 1",
            ));
        }
        if self.types.len() != n {
            return Err(Error::config(
                "genome.types",
                format!("expected {n} entries, got {}", self.types.len()),
            ));
        }
        if let Some(pos) = self.types.iter().position(|&b| b > 1) {
            return Err(Error::config(
                "genome.types",
                format!("entry {pos} is {}, expected 0 or 1", self.types[pos]),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if n < 4 {
            return Err(Error::config(
                "genome.width",
                format!(
                    "width×height must be at least 4, got {}×{}",
                    self.width, self.height
                ),
            ));
        }
        if self.types.len() != n {
            return Err(Error::config(
                "genome.types",
                format!("expected {n} entries, got {}", self.types.len()),
            ));
        }
        if let Some(pos) = self.types.iter().position(|&b| b > 1) {
            return Err(Error::config(
                "genome.types",
                format!("entry {pos} is {}, expected 0 or 1", self.types[pos]),
            ));
        }
        let [a, b] = self.input_particles;
        for (field, idx) in [
            ("genome.input_particles", a),
            ("genome.input_particles", b),
            ("genome.output_particle", self.output_particle),
        ] {
            if idx >= n {
                return Err(Error::config(
                    field,
                    format!("index {idx} out of range 0..{n}"),
                ));
            }
        }
        if a == b {
            return Err(Error::config(
                "genome.input_particles",
                "the two inputs must differ",
            ));
        }
        if self.output_particle == a || self.output_particle == b {
            return Err(Error::config(
                "genome.output_particle",
                "output must differ from both inputs",
            ));
        }
        Ok(())
    }

    /// Left-right reflection. Designated particles move with their sites;
    /// the input pair order is kept, so input 0 lands on the mirror site of
    /// the original input 0.
    pub fn mirrored(&self) -> Genome {
        let mirror = |i: usize| {
            let (col, row) = (i % self.width, i / self.width);
            row * self.width + (self.width - 1 - col)
        };
        let mut types = vec![0; self.types.len()];
        for (i, &t) in self.types.iter().enumerate() {
            types[mirror(i)] = t;
        }
        Genome {
            width: self.width,
            height: self.height,
            types,
            input_particles: [
                mirror(self.input_particles[0]),
                mirror(self.input_particles[1]),
            ],
            output_particle: mirror(self.output_particle),
        }
    }

    pub fn stiff_count(&self) -> usize {
        self.types.iter().filter(|&&b| b == 1).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    pub k_soft: f64,
    pub k_stiff: f64,
    pub k_tether: f64,
    pub damping: f64,
    pub mass: f64,
    pub radius: f64,
    /// Rest overlap as a fraction of the particle diameter.
    pub precompression: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            k_soft: 1.0,
            k_stiff: 10.0,
            k_tether: 0.1,
            damping: 0.05,
            mass: 1.0,
            radius: 0.5,
            precompression: 0.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("material.k_soft", self.k_soft),
            ("material.k_stiff", self.k_stiff),
            ("material.k_tether", self.k_tether),
            ("material.damping", self.damping),
            ("material.mass", self.mass),
            ("material.radius", self.radius),
            ("material.precompression", self.precompression),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(field, "must be finite"));
            }
        }
        if self.k_soft <= 0.0 {
            return Err(Error::config("material.k_soft", "must be > 0"));
        }
        if self.k_stiff < self.k_soft {
            return Err(Error::config("material.k_stiff", "must be >= k_soft"));
        }
        if self.k_tether <= 0.0 {
            return Err(Error::config("material.k_tether", "must be > 0"));
        }
        if self.damping < 0.0 {
            return Err(Error::config("material.damping", "must be >= 0"));
        }
        if self.mass <= 0.0 {
            return Err(Error::config("material.mass", "must be > 0"));
        }
        if self.radius <= 0.0 {
            return Err(Error::config("material.radius", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.precompression) {
            return Err(Error::config(
                "material.precompression",
                "must lie in [0, 1)",
            ));
        }
        Ok(())
    }

    pub fn stiffness(&self, class: StiffnessClass) -> f64 {
        match class {
            StiffnessClass::Soft => self.k_soft,
            StiffnessClass::Stiff => self.k_stiff,
        }
    }

    /// Grid spacing of the rest lattice.
    pub fn spacing(&self) -> f64 {
        2.0 * self.radius * (1.0 - self.precompression)
    }
}

/// Series-spring combination of two contact stiffnesses.
pub fn pair_stiffness(a: StiffnessClass, b: StiffnessClass, params: &MaterialParams) -> f64 {
    let (ka, kb) = (params.stiffness(a), params.stiffness(b));
    2.0 * ka * kb / (ka + kb)
}

/// Repulsive Hertzian force magnitude `k·overlap^1.5`; zero when separated.
#[inline]
pub fn contact_force(overlap: f64, k: f64) -> f64 {
    if overlap > 0.0 {
        k * overlap * overlap.sqrt()
    } else {
        0.0
    }
}

/// Elastic energy stored in a compressed contact, `(2/5)·k·overlap^2.5`.
#[inline]
pub fn contact_potential(overlap: f64, k: f64) -> f64 {
    if overlap > 0.0 {
        0.4 * k * overlap * overlap * overlap.sqrt()
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub i: usize,
    pub j: usize,
    pub k: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeState {
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub rest_positions: Vec<Vec2>,
    pub contacts: Vec<Contact>,
    pub time: f64,
    pub steps_taken: usize,
    /// Internal (contact + tether) force at the current positions.
    internal: Vec<Vec2>,
}

pub fn build_lattice(genome: &Genome, params: &MaterialParams) -> Result<LatticeState> {
    genome.validate_shape()?;
    params.validate()?;
    let (w, h) = (genome.width, genome.height);
    let s = params.spacing();
    let rest: Vec<Vec2> = (0..w * h)
        .map(|i| [(i % w) as f64 * s, (i / w) as f64 * s])
        .collect();

    let mut contacts = Vec::with_capacity((w - 1) * h + w * (h - 1));
    let k = |i: usize, j: usize| pair_stiffness(genome.class(i), genome.class(j), params);
    for row in 0..h {
        for col in 0..w - 1 {
            let i = row * w + col;
            contacts.push(Contact {
                i,
                j: i + 1,
                k: k(i, i + 1),
            });
        }
    }
    for row in 0..h - 1 {
        for col in 0..w {
            let i = row * w + col;
            contacts.push(Contact {
                i,
                j: i + w,
                k: k(i, i + w),
            });
        }
    }

    let n = rest.len();
    let mut state = LatticeState {
        positions: rest.clone(),
        velocities: vec![[0.0; 2]; n],
        rest_positions: rest,
        contacts,
        time: 0.0,
        steps_taken: 0,
        internal: vec![[0.0; 2]; n],
    };
    state.refresh_forces(params);
    Ok(state)
}

impl LatticeState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn displacement(&self, i: usize) -> Vec2 {
        [
            self.positions[i][0] - self.rest_positions[i][0],
            self.positions[i][1] - self.rest_positions[i][1],
        ]
    }

    /// Contact plus tether force on every particle at the current positions.
    pub fn internal_forces(&self) -> &[Vec2] {
        &self.internal
    }

    /// Recompute cached internal forces, e.g. after editing positions directly.
    pub fn refresh_forces(&mut self, params: &MaterialParams) {
        compute_internal(
            &self.positions,
            &self.rest_positions,
            &self.contacts,
            params,
            &mut self.internal,
        );
    }

    /// One velocity-Verlet step. Damping enters the closing half-kick
    /// implicitly, so the update stays explicit in positions.
    pub fn step(&mut self, external: &[Vec2], dt: f64, params: &MaterialParams) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::config("dt", "must be > 0"));
        }
        if external.len() != self.len() {
            return Err(Error::config(
                "external_forces",
                format!("expected {} entries, got {}", self.len(), external.len()),
            ));
        }
        let inv_m = 1.0 / params.mass;
        let c = params.damping;
        let half = 0.5 * dt;

        for i in 0..self.len() {
            let v = &mut self.velocities[i];
            let f = self.internal[i];
            for d in 0..2 {
                v[d] += half * (f[d] + external[i][d] - c * v[d]) * inv_m;
                self.positions[i][d] += dt * v[d];
            }
        }

        compute_internal(
            &self.positions,
            &self.rest_positions,
            &self.contacts,
            params,
            &mut self.internal,
        );

        let denom = 1.0 + half * c * inv_m;
        for i in 0..self.len() {
            let v = &mut self.velocities[i];
            let f = self.internal[i];
            for d in 0..2 {
                v[d] = (v[d] + half * (f[d] + external[i][d]) * inv_m) / denom;
            }
        }

        self.time += dt;
        self.steps_taken += 1;

        let finite = self
            .positions
            .iter()
            .chain(self.velocities.iter())
            .all(|p| p[0].is_finite() && p[1].is_finite());
        if !finite {
            return Err(Error::Blowup {
                step: self.steps_taken,
            });
        }
        Ok(())
    }
}

fn compute_internal(
    positions: &[Vec2],
    rest: &[Vec2],
    contacts: &[Contact],
    params: &MaterialParams,
    out: &mut [Vec2],
) {
    let kt = params.k_tether;
    for ((o, p), r) in out.iter_mut().zip(positions).zip(rest) {
        o[0] = -kt * (p[0] - r[0]);
        o[1] = -kt * (p[1] - r[1]);
    }
    let diameter = 2.0 * params.radius;
    let d2max = diameter * diameter;
    for c in contacts {
        let (pi, pj) = (positions[c.i], positions[c.j]);
        let dx = pj[0] - pi[0];
        let dy = pj[1] - pi[1];
        let dist2 = dx * dx + dy * dy;
        if dist2 >= d2max {
            continue;
        }
        let dist = dist2.sqrt();
        let f = contact_force(diameter - dist, c.k) / dist;
        out[c.i][0] -= f * dx;
        out[c.i][1] -= f * dy;
        out[c.j][0] += f * dx;
        out[c.j][1] += f * dy;
    }
}

/// Kinetic + tether + contact energy.
pub fn total_energy(state: &LatticeState, params: &MaterialParams) -> f64 {
    let diameter = 2.0 * params.radius;
    let kinetic: f64 = state
        .velocities
        .iter()
        .map(|v| 0.5 * params.mass * (v[0] * v[0] + v[1] * v[1]))
        .sum();
    let tether: f64 = (0..state.len())
        .map(|i| {
            let d = state.displacement(i);
            0.5 * params.k_tether * (d[0] * d[0] + d[1] * d[1])
        })
        .sum();
    let contact: f64 = state
        .contacts
        .iter()
        .map(|c| {
            let (pi, pj) = (state.positions[c.i], state.positions[c.j]);
            let dist = ((pj[0] - pi[0]).powi(2) + (pj[1] - pi[1]).powi(2)).sqrt();
            contact_potential(diameter - dist, c.k)
        })
        .sum();
    kinetic + tether + contact
}

/// Readout window of a run: per-step displacement and velocity of the
/// recorded particles.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub recorded_ids: Vec<usize>,
    /// `displacements[k][n]` is particle `recorded_ids[k]` at sample `n`.
    pub displacements: Vec<Vec<Vec2>>,
    pub velocities: Vec<Vec<Vec2>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.displacements.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn slot(&self, particle: usize) -> Result<usize> {
        self.recorded_ids
            .iter()
            .position(|&p| p == particle)
            .ok_or(Error::NotRecorded(particle))
    }

    pub fn displacement_series(&self, particle: usize) -> Result<&[Vec2]> {
        Ok(&self.displacements[self.slot(particle)?])
    }

    pub fn velocity_series(&self, particle: usize) -> Result<&[Vec2]> {
        Ok(&self.velocities[self.slot(particle)?])
    }

    pub fn speed_series(&self, particle: usize) -> Result<Vec<f64>> {
        Ok(self
            .velocity_series(particle)?
            .iter()
            .map(|v| v[0].hypot(v[1]))
            .collect())
    }
}

/// Unit direction along which an input particle is pushed: the lattice
/// diagonal pointing toward the sheet's center. Components along a symmetry
/// axis the particle sits on are dropped, so the drive reflects with the
/// lattice. A particle at the exact center is pushed along +y.
pub fn drive_direction(genome: &Genome, particle: usize) -> Vec2 {
    let col = (particle % genome.width) as f64;
    let row = (particle / genome.width) as f64;
    let toward = |pos: f64, extent: usize| {
        let center = (extent as f64 - 1.0) / 2.0;
        if pos < center {
            1.0
        } else if pos > center {
            -1.0
        } else {
            0.0
        }
    };
    let (sx, sy) = (toward(col, genome.width), toward(row, genome.height));
    match (sx != 0.0, sy != 0.0) {
        (true, true) => [
            sx * std::f64::consts::FRAC_1_SQRT_2,
            sy * std::f64::consts::FRAC_1_SQRT_2,
        ],
        (true, false) => [sx, 0.0],
        (false, true) => [0.0, sy],
        (false, false) => [0.0, 1.0],
    }
}

/// Run a genome from rest under the drive encoding `input_bits` and return
/// the readout window. The output particle and both inputs are recorded.
pub fn simulate(genome: &Genome, config: &RunConfig, input_bits: [bool; 2]) -> Result<Trace> {
    let spec = &config.excitation;
    simulate_with_drive(genome, config, |t| {
        signal::drive_signal(input_bits, spec, t)
    })
}

/// Like [`simulate`] with an arbitrary scalar force per input, applied along
/// each input's [`drive_direction`].
pub fn simulate_with_drive<F>(genome: &Genome, config: &RunConfig, drive: F) -> Result<Trace>
where
    F: Fn(f64) -> (f64, f64),
{
    config.validate()?;
    genome.validate()?;
    let params = &config.material;
    let mut state = build_lattice(genome, params)?;
    let dt = config.integration.dt;
    let n = state.len();

    if params.precompression > 0.0 {
        let relax = MaterialParams {
            damping: params.damping.max(1e-3) * 10.0,
            ..params.clone()
        };
        let zero = vec![[0.0; 2]; n];
        for _ in 0..10 * config.transient_steps() {
            state.step(&zero, dt, &relax)?;
        }
        state.velocities.iter_mut().for_each(|v| *v = [0.0; 2]);
        state.refresh_forces(params);
        state.steps_taken = 0;
    }
    // Displacements are reported relative to the (possibly relaxed) start.
    let origin = state.positions.clone();

    let recorded_ids = vec![
        genome.output_particle,
        genome.input_particles[0],
        genome.input_particles[1],
    ];
    let transient = config.transient_steps();
    let window = config.window_steps();
    let mut displacements = vec![Vec::with_capacity(window); recorded_ids.len()];
    let mut velocities = vec![Vec::with_capacity(window); recorded_ids.len()];

    let mut external = vec![[0.0; 2]; n];
    let [in0, in1] = genome.input_particles;
    let (dir0, dir1) = (drive_direction(genome, in0), drive_direction(genome, in1));
    for step in 0..transient + window {
        // Drive sampled at the step midpoint.
        let t = (step as f64 + 0.5) * dt;
        let (f0, f1) = drive(t);
        external[in0] = [f0 * dir0[0], f0 * dir0[1]];
        external[in1] = [f1 * dir1[0], f1 * dir1[1]];
        state.step(&external, dt, params)?;
        if step >= transient {
            for (k, &p) in recorded_ids.iter().enumerate() {
                let x = state.positions[p];
                displacements[k].push([x[0] - origin[p][0], x[1] - origin[p][1]]);
                velocities[k].push(state.velocities[p]);
            }
        }
    }

    Ok(Trace {
        dt,
        recorded_ids,
        displacements,
        velocities,
    })
}
