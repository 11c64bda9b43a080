//! Mechanism data model: species, NASA-7 thermodynamics, and reactions.
//!
//! Units follow the CGS-mole convention used by most kinetics tables:
//! concentrations in mol/cm³, pre-exponential factors in matching
//! mol-cm-s units, activation energies in cal/mol.

mod parse;
mod thermo;

use std::collections::BTreeMap;
use std::fmt;

pub use parse::{parse_mechanism, serialize_mechanism};
pub use thermo::{NasaPoly7, ThermoProps};

/// Gas constant in cal/(mol·K), used with activation energies.
pub const GAS_CONSTANT_CAL: f64 = 1.9872036;
/// Gas constant in erg/(mol·K).
pub const GAS_CONSTANT_CGS: f64 = 8.314462618e7;
/// One standard atmosphere in dyn/cm².
pub const ONE_ATM: f64 = 1.01325e6;

const BASELINE_TEXT: &str = include_str!("../../data/h2_baseline.mech");

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no species defined")]
    NoSpecies,
    #[error("reaction {reaction}: unknown species '{species}'")]
    UnknownSpecies { reaction: String, species: String },
    #[error("reaction {reaction}: element {element} is not conserved")]
    ElementImbalance { reaction: String, element: String },
    #[error("reaction {reaction}: pre-exponential factor must be positive")]
    NonPositiveA { reaction: String },
    #[error("reaction {reaction}: {message}")]
    InvalidReaction { reaction: String, message: String },
    #[error("species {species}: {message}")]
    InvalidSpecies { species: String, message: String },
    #[error("species {species}: T = {t} K outside thermo range [{t_low}, {t_high}]")]
    ThermoRange {
        species: String,
        t: f64,
        t_low: f64,
        t_high: f64,
    },
}

/// Standard atomic masses (g/mol) of the elements the parser knows about.
pub fn atomic_mass(element: &str) -> Option<f64> {
    let m = match element {
        "H" => 1.008,
        "O" => 15.999,
        "N" => 14.007,
        "C" => 12.011,
        "AR" => 39.95,
        "HE" => 4.002602,
        _ => return None,
    };
    Some(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    /// g/mol
    pub molar_mass: f64,
    pub elements: BTreeMap<String, u32>,
    pub thermo: NasaPoly7,
}

impl Species {
    /// Evaluates the NASA-7 polynomials, rejecting temperatures outside the fit range.
    pub fn thermo_props(&self, t: f64) -> Result<ThermoProps, MechanismError> {
        let th = &self.thermo;
        if !(t >= th.t_low && t <= th.t_high) {
            return Err(MechanismError::ThermoRange {
                species: self.name.clone(),
                t,
                t_low: th.t_low,
                t_high: th.t_high,
            });
        }
        Ok(th.eval(t))
    }
}

/// Free-function form of [`Species::thermo_props`].
pub fn thermo_props(species: &Species, t: f64) -> Result<ThermoProps, MechanismError> {
    species.thermo_props(t)
}

/// `k = A T^beta exp(-Ea / RT)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrhenius {
    pub a: f64,
    pub beta: f64,
    /// cal/mol
    pub ea: f64,
}

impl Arrhenius {
    pub fn new(a: f64, beta: f64, ea: f64) -> Self {
        Self { a, beta, ea }
    }
}

/// Collision efficiencies; species not listed have efficiency 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Efficiencies(pub Vec<(usize, f64)>);

impl Efficiencies {
    pub fn get(&self, species: usize) -> f64 {
        self.0
            .iter()
            .find(|(s, _)| *s == species)
            .map_or(1.0, |(_, e)| *e)
    }

    pub fn set(&mut self, species: usize, value: f64) {
        match self.0.iter_mut().find(|(s, _)| *s == species) {
            Some(slot) => slot.1 = value,
            None => self.0.push((species, value)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateModel {
    Elementary(Arrhenius),
    ThirdBody {
        rate: Arrhenius,
        efficiencies: Efficiencies,
    },
    Falloff {
        high: Arrhenius,
        low: Arrhenius,
        troe_fc: f64,
        efficiencies: Efficiencies,
    },
}

impl RateModel {
    /// The leading Arrhenius set (high-pressure limit for falloff).
    pub fn primary(&self) -> &Arrhenius {
        match self {
            RateModel::Elementary(r) => r,
            RateModel::ThirdBody { rate, .. } => rate,
            RateModel::Falloff { high, .. } => high,
        }
    }

    pub fn primary_mut(&mut self) -> &mut Arrhenius {
        match self {
            RateModel::Elementary(r) => r,
            RateModel::ThirdBody { rate, .. } => rate,
            RateModel::Falloff { high, .. } => high,
        }
    }

    pub fn efficiencies(&self) -> Option<&Efficiencies> {
        match self {
            RateModel::Elementary(_) => None,
            RateModel::ThirdBody { efficiencies, .. } | RateModel::Falloff { efficiencies, .. } => {
                Some(efficiencies)
            }
        }
    }

    pub fn efficiencies_mut(&mut self) -> Option<&mut Efficiencies> {
        match self {
            RateModel::Elementary(_) => None,
            RateModel::ThirdBody { efficiencies, .. } | RateModel::Falloff { efficiencies, .. } => {
                Some(efficiencies)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub id: String,
    /// (species index, stoichiometric coefficient)
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<(usize, u32)>,
    pub reversible: bool,
    pub rate: RateModel,
    /// Extra Arrhenius sets sharing this stoichiometry; rates add.
    pub duplicates: Vec<Arrhenius>,
}

impl Reaction {
    /// Net stoichiometric coefficient (products minus reactants) per species.
    pub fn net_stoichiometry(&self, n_species: usize) -> Vec<i64> {
        let mut nu = vec![0i64; n_species];
        for &(s, c) in &self.reactants {
            nu[s] -= i64::from(c);
        }
        for &(s, c) in &self.products {
            nu[s] += i64::from(c);
        }
        nu
    }

    /// Every Arrhenius set contributing to the forward rate, in file order.
    pub fn arrhenius_sets(&self) -> impl Iterator<Item = &Arrhenius> {
        std::iter::once(self.rate.primary()).chain(self.duplicates.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub species: Vec<Species>,
    pub reactions: Vec<Reaction>,
    pub default_bath: Option<usize>,
}

impl Mechanism {
    /// The bundled hydrogen/oxygen baseline.
    pub fn baseline() -> Mechanism {
        parse_mechanism(BASELINE_TEXT).expect("bundled baseline mechanism parses")
    }

    pub fn baseline_text() -> &'static str {
        BASELINE_TEXT
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn reaction_index(&self, id: &str) -> Option<usize> {
        self.reactions.iter().position(|r| r.id == id)
    }

    pub fn reaction(&self, id: &str) -> Option<&Reaction> {
        self.reactions.iter().find(|r| r.id == id)
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn molar_masses(&self) -> Vec<f64> {
        self.species.iter().map(|s| s.molar_mass).collect()
    }

    /// Renders a reaction equation using species names.
    pub fn equation(&self, r: &Reaction) -> String {
        let side = |terms: &[(usize, u32)]| {
            let mut parts: Vec<String> = terms
                .iter()
                .map(|&(s, c)| {
                    if c == 1 {
                        self.species[s].name.clone()
                    } else {
                        format!("{} {}", c, self.species[s].name)
                    }
                })
                .collect();
            match r.rate {
                RateModel::ThirdBody { .. } => parts.push("M".into()),
                RateModel::Falloff { .. } => {
                    let last = parts.pop().unwrap_or_default();
                    parts.push(format!("{last} (+M)"));
                }
                RateModel::Elementary(_) => {}
            }
            parts.join(" + ")
        };
        let arrow = if r.reversible { "=" } else { "=>" };
        format!("{} {} {}", side(&r.reactants), arrow, side(&r.products))
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_mechanism(self))
    }
}

/// Element-by-species count matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrix {
    pub elements: Vec<String>,
    /// counts[e][s]
    pub counts: Vec<Vec<i64>>,
}

impl ElementMatrix {
    pub fn count(&self, element: &str, species: usize) -> i64 {
        self.elements
            .iter()
            .position(|e| e == element)
            .map_or(0, |e| self.counts[e][species])
    }

    /// A·v for an integer vector over species.
    pub fn apply(&self, v: &[i64]) -> Vec<i64> {
        self.counts
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub fn element_matrix(mech: &Mechanism) -> ElementMatrix {
    let mut elements: Vec<String> = mech
        .species
        .iter()
        .flat_map(|s| s.elements.keys().cloned())
        .collect();
    elements.sort();
    elements.dedup();
    let counts = elements
        .iter()
        .map(|e| {
            mech.species
                .iter()
                .map(|s| s.elements.get(e).copied().map_or(0, i64::from))
                .collect()
        })
        .collect();
    ElementMatrix { elements, counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_rows() {
        let mech = Mechanism::baseline();
        let em = element_matrix(&mech);
        let h2o = mech.species_index("H2O").unwrap();
        let n2 = mech.species_index("N2").unwrap();
        assert_eq!(em.count("H", h2o), 2);
        assert_eq!(em.count("O", h2o), 1);
        assert_eq!(em.count("N", h2o), 0);
        assert_eq!(em.count("N", n2), 2);
        for e in &em.elements {
            if e != "N" {
                assert_eq!(em.count(e, n2), 0);
            }
        }
    }

    #[test]
    fn every_reaction_in_element_kernel() {
        let mech = Mechanism::baseline();
        let em = element_matrix(&mech);
        for r in &mech.reactions {
            let nu = r.net_stoichiometry(mech.n_species());
            assert!(em.apply(&nu).iter().all(|&x| x == 0), "{}", r.id);
        }
    }

    #[test]
    fn molar_masses_match_elements() {
        for s in Mechanism::baseline().species {
            let m: f64 = s
                .elements
                .iter()
                .map(|(e, &n)| atomic_mass(e).unwrap() * f64::from(n))
                .sum();
            assert!(((m - s.molar_mass) / m).abs() < 1e-3, "{}", s.name);
        }
    }

    #[test]
    fn thermo_range_error() {
        let mech = Mechanism::baseline();
        let h2 = &mech.species[mech.species_index("H2").unwrap()];
        assert!(matches!(
            h2.thermo_props(100.0),
            Err(MechanismError::ThermoRange { .. })
        ));
        assert!(h2.thermo_props(4000.0).is_err());
        assert!(h2.thermo_props(1500.0).is_ok());
    }

    #[test]
    fn efficiency_defaults_to_one() {
        let mut e = Efficiencies::default();
        assert_eq!(e.get(3), 1.0);
        e.set(3, 0.5);
        e.set(3, 0.25);
        assert_eq!(e.get(3), 0.25);
        assert_eq!(e.0.len(), 1);
    }
}
