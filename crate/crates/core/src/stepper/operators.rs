//! Time-independent operators and the fixed sparsity layouts of the two
//! linear systems solved every step.
//!
//! Saddle system unknowns are `[u1 | u2 | p]`. Momentum rows hold
//! `A | -B^T`, continuity rows hold `-B | 0`. Dirichlet velocity rows are
//! identity rows. The continuity row of pressure node 0 is replaced by
//! `p_0 = 0`, and the pressure is shifted to zero mean after the solve.
//! Dropping that row loses nothing when the velocity trace has zero net
//! flux, because the P1 basis sums to one.

use std::sync::{Arc, OnceLock};

use crate::error::Result;
use crate::fem::assembly::{mass_values, stiffness_values};
use crate::fem::{assemble_divergence, FeSpace, SpaceKind};
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{CsrMatrix, Factorization, SymbolicAnalysis};

const NONE: usize = usize::MAX;

/// Pressure node pinned to zero before the mean shift.
pub const PINNED_PRESSURE_NODE: usize = 0;

/// Fixed pattern of a system matrix built from one scalar P2 operator.
#[derive(Debug)]
pub struct SystemLayout {
    template: CsrMatrix,
    base: Vec<f64>,
    /// Destinations of each scalar-pattern slot, one per velocity component.
    scatter: Vec<[usize; 2]>,
    symbolic: OnceLock<Arc<SymbolicAnalysis>>,
}

impl SystemLayout {
    /// `base + scatter(scalar_values)` as a matrix in the fixed pattern.
    pub fn assemble(&self, scalar_values: &[f64]) -> CsrMatrix {
        let mut values = self.base.clone();
        for (dest, v) in self.scatter.iter().zip(scalar_values) {
            for &d in dest {
                if d != NONE {
                    values[d] += v;
                }
            }
        }
        self.template.with_values(values).expect("layout sized values")
    }

    pub fn factorize(&self, a: &CsrMatrix) -> Result<Factorization> {
        let symbolic = match self.symbolic.get() {
            Some(s) => s.clone(),
            None => {
                let s = Arc::new(SymbolicAnalysis::new(a)?);
                self.symbolic.get_or_init(|| s).clone()
            }
        };
        Factorization::with_symbolic(symbolic, a)
    }

    pub fn dim(&self) -> usize {
        self.template.nrows()
    }
}

/// Which temperature nodes carry Dirichlet values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThermalDirichlet {
    /// Hot and cold walls; the horizontal walls are insulated.
    VerticalWalls,
    /// The whole boundary.
    AllWalls,
    /// No Dirichlet nodes.
    None,
}

impl ThermalDirichlet {
    pub fn applies(self, tag: BoundaryTag) -> bool {
        match self {
            ThermalDirichlet::VerticalWalls => tag != BoundaryTag::Insulated,
            ThermalDirichlet::AllWalls => true,
            ThermalDirichlet::None => false,
        }
    }
}

#[derive(Debug)]
pub struct Operators {
    pub velocity: FeSpace,
    pub temperature: FeSpace,
    pub pressure: FeSpace,
    /// Scalar P2 mass and unit stiffness in the temperature space's pattern.
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    /// `n_pressure x n_velocity`
    pub divergence: CsrMatrix,
    /// `(1, psi_i)` for the pressure nodes.
    pub pressure_weights: Vec<f64>,
    /// Velocity dofs with Dirichlet rows, component-blocked.
    pub velocity_dirichlet: Vec<usize>,
    /// Temperature nodes with Dirichlet rows and their walls.
    pub thermal_dirichlet: Vec<(usize, BoundaryTag)>,
    pub saddle: SystemLayout,
    pub thermal: SystemLayout,
}

impl Operators {
    pub fn new(mesh: Arc<Mesh>, thermal_bc: ThermalDirichlet) -> Result<Self> {
        let velocity = FeSpace::new(mesh.clone(), SpaceKind::VectorP2);
        let temperature = FeSpace::new(mesh.clone(), SpaceKind::ScalarP2);
        let pressure = FeSpace::new(mesh, SpaceKind::ScalarP1);
        let template = &temperature.pattern().template;
        let mass = template.with_values(mass_values(&temperature))?;
        let stiffness = template.with_values(stiffness_values(&temperature))?;
        let divergence = assemble_divergence(&velocity, &pressure)?;
        let pressure_weights = crate::fem::assemble_mass(&pressure).mul_vec(&vec![1.0; pressure.dof_count()]);
        let velocity_dirichlet: Vec<usize> = velocity.boundary_dofs().into_iter().map(|(d, _)| d).collect();
        let thermal_dirichlet: Vec<(usize, BoundaryTag)> =
            temperature.boundary_nodes().iter().copied().filter(|&(_, tag)| thermal_bc.applies(tag)).collect();
        let saddle = saddle_layout(template, &divergence, &velocity_dirichlet)?;
        let thermal = thermal_layout(template, &thermal_dirichlet)?;
        Ok(Self {
            velocity,
            temperature,
            pressure,
            mass,
            stiffness,
            divergence,
            pressure_weights,
            velocity_dirichlet,
            thermal_dirichlet,
            saddle,
            thermal,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.velocity.mesh()
    }

    /// Scalar P2 node count.
    pub fn n(&self) -> usize {
        self.temperature.n_nodes()
    }

    pub fn h(&self) -> f64 {
        self.mesh().h()
    }

    /// `a M + b N + c K` on the scalar P2 pattern.
    pub fn combine(&self, a: f64, convection: &[f64], b: f64, c: f64) -> Vec<f64> {
        self.mass
            .values()
            .iter()
            .zip(convection)
            .zip(self.stiffness.values())
            .map(|((m, n), k)| a * m + b * n + c * k)
            .collect()
    }

    /// Applies a scalar operator to every component of a block vector.
    pub fn apply_blocks(&self, scalar: &CsrMatrix, v: &[f64]) -> Vec<f64> {
        let n = scalar.nrows();
        let mut out = vec![0.0; v.len()];
        for (src, dst) in v.chunks(n).zip(out.chunks_mut(n)) {
            scalar.mul_vec_into(src, dst);
        }
        out
    }

    /// `||v||^2` in L2 for a scalar or block vector.
    pub fn l2_norm_sq(&self, v: &[f64]) -> f64 {
        dot(v, &self.apply_blocks(&self.mass, v))
    }

    /// `||grad v||^2` for a scalar or block vector.
    pub fn h1_seminorm_sq(&self, v: &[f64]) -> f64 {
        dot(v, &self.apply_blocks(&self.stiffness, v))
    }

    /// Shifts a pressure field to zero mean.
    pub fn remove_pressure_mean(&self, p: &mut [f64]) {
        let area: f64 = self.pressure_weights.iter().sum();
        let mean = dot(&self.pressure_weights, p) / area;
        p.iter_mut().for_each(|x| *x -= mean);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn saddle_layout(scalar: &CsrMatrix, b: &CsrMatrix, dirichlet: &[usize]) -> Result<SystemLayout> {
    let n = scalar.nrows();
    let np = b.nrows();
    let dim = 2 * n + np;
    let mut is_dirichlet = vec![false; 2 * n];
    for &d in dirichlet {
        is_dirichlet[d] = true;
    }
    let bt = b.transpose();
    let mut triplets = Vec::new();
    for c in 0..2 {
        for i in 0..n {
            let r = c * n + i;
            if is_dirichlet[r] {
                triplets.push((r, r, 1.0));
                continue;
            }
            for &j in scalar.row(i).0 {
                triplets.push((r, c * n + j, 0.0));
            }
            let (cols, vals) = bt.row(r);
            for (&p, &v) in cols.iter().zip(vals) {
                triplets.push((r, 2 * n + p, -v));
            }
        }
    }
    for p in 0..np {
        let r = 2 * n + p;
        if p == PINNED_PRESSURE_NODE {
            triplets.push((r, r, 1.0));
            continue;
        }
        let (cols, vals) = b.row(p);
        for (&j, &v) in cols.iter().zip(vals) {
            triplets.push((r, j, -v));
        }
    }
    let template = CsrMatrix::from_triplets(dim, dim, &triplets)?;
    let base = template.values().to_vec();
    let mut scatter = Vec::with_capacity(scalar.nnz());
    for i in 0..n {
        for &j in scalar.row(i).0 {
            let dest = |c: usize| {
                if is_dirichlet[c * n + i] {
                    NONE
                } else {
                    template.position(c * n + i, c * n + j).expect("velocity block slot")
                }
            };
            scatter.push([dest(0), dest(1)]);
        }
    }
    Ok(SystemLayout { template, base, scatter, symbolic: OnceLock::new() })
}

fn thermal_layout(scalar: &CsrMatrix, dirichlet: &[(usize, BoundaryTag)]) -> Result<SystemLayout> {
    let n = scalar.nrows();
    let mut is_dirichlet = vec![false; n];
    for &(d, _) in dirichlet {
        is_dirichlet[d] = true;
    }
    let mut triplets = Vec::new();
    for (i, &fixed) in is_dirichlet.iter().enumerate() {
        if fixed {
            triplets.push((i, i, 1.0));
        } else {
            triplets.extend(scalar.row(i).0.iter().map(|&j| (i, j, 0.0)));
        }
    }
    let template = CsrMatrix::from_triplets(n, n, &triplets)?;
    let base = template.values().to_vec();
    let mut scatter = Vec::with_capacity(scalar.nnz());
    for (i, &fixed) in is_dirichlet.iter().enumerate() {
        for &j in scalar.row(i).0 {
            let d = if fixed { NONE } else { template.position(i, j).expect("thermal slot") };
            scatter.push([d, NONE]);
        }
    }
    Ok(SystemLayout { template, base, scatter, symbolic: OnceLock::new() })
}
