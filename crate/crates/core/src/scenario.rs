//! Scenario configuration: one TOML document describing the law, grids,
//! drift, resolvent/series knobs, simulation budget and outputs. Unknown
//! keys are hard errors; silent typos corrupt numerical studies.

use serde::{Deserialize, Serialize};

use crate::drift::{families, BoundedPart, DriftField};
use crate::error::{Error, Result};
use crate::field::{radial_bump, smooth_window, SpaceTimeField, Tail};
use crate::grid::Lattice2;
use crate::kernel::KernelGrid;
use crate::law::{SpectralAtom, StableLaw};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub law: LawBlock,
    pub grid: GridBlock,
    pub field: FieldBlock,
    pub drift: DriftBlock,
    pub resolvent: ResolventBlock,
    pub series: SeriesBlock,
    pub sim: SimBlock,
    pub observable: ObservableBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawBlock {
    pub alpha: f64,
    pub center: Vec<f64>,
    pub atoms: Vec<AtomBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomBlock {
    pub weight: f64,
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    /// Kernel lattice half-width and points per axis.
    pub extent: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    /// Space-time field lattice for resolvent/series work.
    pub extent: f64,
    pub points: usize,
    /// Slice step, shared by drift, resolvent quadrature and series.
    pub dt: f64,
    /// Field horizon (slices cover [0, horizon]).
    pub horizon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftBlock {
    pub horizon: f64,
    /// Bounded part: constant vector modulated by the smooth window.
    pub bounded_vector: Vec<f64>,
    pub bounded_smooth_in_time: bool,
    /// Singular radial part A |x|^{-theta} (x/|x|) 1_{|x|<=cutoff}.
    pub singular_amplitude: f64,
    pub singular_exponent: f64,
    pub singular_cutoff: f64,
    pub singular_smooth_in_time: bool,
    /// Dedicated fine lattice for the singular component.
    pub lattice_extent: f64,
    pub lattice_points: usize,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventBlock {
    pub lambdas: Vec<f64>,
    pub t_max_lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesBlock {
    pub tol: f64,
    pub lambda_margin: f64,
    pub max_terms: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub step: f64,
    pub paths: usize,
    pub seed: u64,
    pub horizon: f64,
    pub start_time: f64,
    pub start: Vec<f64>,
    pub checkpoints: Vec<f64>,
    pub uniqueness_levels: Vec<usize>,
    pub uniqueness_checkpoint: f64,
    pub uniqueness_paths: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableBlock {
    /// g(t,x) = amplitude * cos^4 radial bump * sin^4 time window.
    pub amplitude: f64,
    pub space_radius: f64,
    pub time_start: f64,
    pub time_length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
    pub formats: Vec<String>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let sc: Scenario =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario parse: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.law.center.len() != 2 {
            return Err(Error::Config("only d = 2 scenarios are supported".into()));
        }
        let adm = crate::drift::check_admissible(2, self.law.alpha, self.drift.p, self.drift.q);
        if !adm.pass {
            return Err(Error::Config(format!(
                "drift exponents inadmissible: d/p + alpha/q = {:.5} >= alpha - 1 = {:.5}",
                adm.lhs, adm.threshold
            )));
        }
        if (self.drift.horizon / self.field.dt).fract().abs() > 1e-9 {
            return Err(Error::Config(
                "drift horizon must be a multiple of the slice step".into(),
            ));
        }
        if self.sim.start.len() != 2 {
            return Err(Error::Config("start point must be two-dimensional".into()));
        }
        Ok(())
    }

    pub fn build_law(&self) -> Result<StableLaw> {
        let atoms = self
            .law
            .atoms
            .iter()
            .map(|a| SpectralAtom::new(a.weight, a.direction.clone()))
            .collect::<Result<Vec<_>>>()?;
        StableLaw::new(self.law.alpha, self.law.center.clone(), atoms)
    }

    pub fn build_kernel(&self, law: &StableLaw) -> Result<KernelGrid> {
        KernelGrid::build(law, self.grid.extent, self.grid.points)
    }

    pub fn field_lattice(&self) -> Lattice2 {
        Lattice2::new(self.field.points, self.field.extent)
    }

    pub fn field_slices(&self) -> usize {
        (self.field.horizon / self.field.dt).round() as usize + 1
    }

    pub fn drift_slices(&self) -> usize {
        (self.drift.horizon / self.field.dt).round() as usize + 1
    }

    pub fn build_drift(&self) -> Result<DriftField> {
        let v = &self.drift.bounded_vector;
        if v.len() != 2 {
            return Err(Error::Config("bounded drift vector must be 2-d".into()));
        }
        let blat = Lattice2::new(self.drift.lattice_points, self.drift.lattice_extent);
        let singular = families::radial_singular(
            blat,
            self.field.dt,
            self.drift_slices(),
            self.drift.singular_amplitude,
            self.drift.singular_exponent,
            self.drift.singular_cutoff,
            self.drift.horizon,
            self.drift.singular_smooth_in_time,
        );
        let bounded = if v[0] == 0.0 && v[1] == 0.0 {
            BoundedPart::Zero
        } else {
            BoundedPart::Constant {
                vector: [v[0], v[1]],
                smooth_in_time: self.drift.bounded_smooth_in_time,
            }
        };
        let d = DriftField {
            bounded,
            sup_bound: (v[0] * v[0] + v[1] * v[1]).sqrt(),
            singular,
            p: self.drift.p,
            q: self.drift.q,
            horizon: self.drift.horizon,
        };
        d.validate(self.law.alpha)?;
        Ok(d)
    }

    /// The observable as a closure (used along Monte Carlo paths).
    pub fn observable_fn(&self) -> impl Fn(f64, [f64; 2]) -> f64 + Sync + Clone + '_ {
        let o = self.observable.clone();
        move |t: f64, x: [f64; 2]| {
            o.amplitude
                * radial_bump((x[0] * x[0] + x[1] * x[1]).sqrt(), o.space_radius)
                * smooth_window((t - o.time_start) / o.time_length)
        }
    }

    /// The observable sampled on the field lattice.
    pub fn observable_field(&self) -> SpaceTimeField {
        let f = self.observable_fn();
        SpaceTimeField::from_fn(
            self.field_lattice(),
            self.field.dt,
            self.field_slices(),
            Tail::Zero,
            move |t, x, y| f(t, [x, y]),
        )
    }

    pub fn sim_config(&self) -> crate::sim::SimConfig {
        crate::sim::SimConfig {
            step: self.sim.step,
            horizon: self.sim.horizon,
            paths: self.sim.paths,
            seed: self.sim.seed,
            start_time: self.sim.start_time,
            start: [self.sim.start[0], self.sim.start[1]],
            checkpoints: self.sim.checkpoints.clone(),
        }
    }
}
