//! Fixed expert categories: five population bands crossed with two travel
//! distance bands, plus a separate category for the reference towns
//! themselves (distance exactly zero).

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceBand {
    /// Distance exactly zero.
    Zero,
    /// `lo <= t < hi` with `t > 0`; a band starting at 0 is open on the left.
    Positive { lo: f64, hi: f64 },
}

impl DistanceBand {
    pub fn contains(&self, t: f64) -> bool {
        match *self {
            DistanceBand::Zero => t == 0.0,
            DistanceBand::Positive { lo, hi } => t > 0.0 && t >= lo && t < hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryRule {
    pub label: &'static str,
    /// Half-open population interval `[lo, hi)`.
    pub population: (f64, f64),
    pub distance: DistanceBand,
}

impl CategoryRule {
    pub fn matches(&self, population: f64, distance: f64) -> bool {
        let (lo, hi) = self.population;
        population >= lo && population < hi && self.distance.contains(distance)
    }
}

const NEAR: DistanceBand = DistanceBand::Positive { lo: 0.0, hi: 15.0 };
const FAR: DistanceBand = DistanceBand::Positive {
    lo: 15.0,
    hi: f64::INFINITY,
};

pub const EXPERT_RULES: [CategoryRule; 11] = [
    CategoryRule { label: "E01", population: (0.0, 200.0), distance: NEAR },
    CategoryRule { label: "E02", population: (0.0, 200.0), distance: FAR },
    CategoryRule { label: "E03", population: (200.0, 500.0), distance: NEAR },
    CategoryRule { label: "E04", population: (200.0, 500.0), distance: FAR },
    CategoryRule { label: "E05", population: (500.0, 1000.0), distance: NEAR },
    CategoryRule { label: "E06", population: (500.0, 1000.0), distance: FAR },
    CategoryRule { label: "E07", population: (1000.0, 2000.0), distance: NEAR },
    CategoryRule { label: "E08", population: (1000.0, 2000.0), distance: FAR },
    CategoryRule { label: "E09", population: (2000.0, f64::INFINITY), distance: NEAR },
    CategoryRule { label: "E10", population: (2000.0, f64::INFINITY), distance: FAR },
    CategoryRule { label: "E11", population: (0.0, f64::INFINITY), distance: DistanceBand::Zero },
];

/// Expert category of a unit with `population > 0` and `distance >= 0`.
pub fn assign_expert_category(population: f64, distance: f64) -> &'static str {
    EXPERT_RULES
        .iter()
        .find(|r| r.matches(population, distance))
        .map(|r| r.label)
        .expect("expert rules cover every population > 0 and distance >= 0")
}
