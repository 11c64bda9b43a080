//! Rate constants and mass-action production rates.

use crate::mechanism::{
    Arrhenius, Efficiencies, Mechanism, MechanismError, RateModel, Reaction, GAS_CONSTANT_CAL,
    GAS_CONSTANT_CGS, ONE_ATM,
};

/// Temperature plus molar concentrations (mol/cm³) in mechanism species order.
#[derive(Debug, Clone, PartialEq)]
pub struct GasState {
    pub temperature: f64,
    pub concentrations: Vec<f64>,
}

impl GasState {
    pub fn new(temperature: f64, concentrations: Vec<f64>) -> Self {
        Self {
            temperature,
            concentrations,
        }
    }

    /// Ideal-gas state from pressure (dyn/cm²) and mole fractions.
    pub fn from_mole_fractions(temperature: f64, pressure: f64, x: &[f64]) -> Self {
        let total = pressure / (GAS_CONSTANT_CGS * temperature);
        Self::new(temperature, x.iter().map(|xi| xi * total).collect())
    }

    pub fn total_concentration(&self) -> f64 {
        self.concentrations.iter().sum()
    }

    /// dyn/cm²
    pub fn pressure(&self) -> f64 {
        self.total_concentration() * GAS_CONSTANT_CGS * self.temperature
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateEvaluation {
    /// Forward rate constants; for third-body reactions this excludes the [M] factor.
    pub kf: Vec<f64>,
    pub kr: Vec<f64>,
    /// mol/(cm³·s) per reaction
    pub net_rates: Vec<f64>,
    /// mol/(cm³·s) per species
    pub production: Vec<f64>,
    /// Set when negative concentrations were clipped to zero.
    pub clipped: bool,
}

pub fn arrhenius(p: &Arrhenius, t: f64) -> f64 {
    let temp_factor = if p.beta == 0.0 { 1.0 } else { t.powf(p.beta) };
    p.a * temp_factor * (-p.ea / (GAS_CONSTANT_CAL * t)).exp()
}

/// Effective collider concentration; unlisted species count with efficiency 1.
pub fn third_body_conc(concentrations: &[f64], efficiencies: &Efficiencies) -> f64 {
    let mut m: f64 = concentrations.iter().sum();
    for &(s, e) in &efficiencies.0 {
        m += (e - 1.0) * concentrations[s];
    }
    m
}

/// Troe falloff blend with a temperature-independent centering factor.
pub fn troe_falloff(k_high: f64, k_low: f64, fc: f64, m_eff: f64) -> f64 {
    let pr = k_low * m_eff / k_high;
    if !(pr > 0.0) {
        return 0.0;
    }
    let log_fc = fc.log10();
    let c = -0.4 - 0.67 * log_fc;
    let n = 0.75 - 1.27 * log_fc;
    let x = pr.log10() + c;
    let f1 = x / (n - 0.14 * x);
    let log_f = log_fc / (1.0 + f1 * f1);
    k_high * (pr / (1.0 + pr)) * 10f64.powf(log_f)
}

/// Σ Arrhenius sets (or the falloff blend) at temperature `t`.
fn forward_constant(r: &Reaction, t: f64, m_eff: f64) -> f64 {
    match &r.rate {
        RateModel::Falloff {
            high, low, troe_fc, ..
        } => troe_falloff(arrhenius(high, t), arrhenius(low, t), *troe_fc, m_eff),
        _ => r.arrhenius_sets().map(|a| arrhenius(a, t)).sum(),
    }
}

fn delta_nu(r: &Reaction) -> i64 {
    let p: i64 = r.products.iter().map(|&(_, c)| i64::from(c)).sum();
    let q: i64 = r.reactants.iter().map(|&(_, c)| i64::from(c)).sum();
    p - q
}

fn kc_from_gibbs(r: &Reaction, g_rt: &[f64], t: f64) -> f64 {
    let side = |terms: &[(usize, u32)]| -> f64 {
        terms.iter().map(|&(s, c)| f64::from(c) * g_rt[s]).sum()
    };
    let dg = side(&r.products) - side(&r.reactants);
    let dn = delta_nu(r);
    let conv = if dn == 0 {
        1.0
    } else {
        (ONE_ATM / (GAS_CONSTANT_CGS * t)).powi(dn as i32)
    };
    (-dg).exp() * conv
}

/// Concentration-based equilibrium constant `Kc = exp(ΔS/R − ΔH/RT) (P°/RT)^Δν`.
pub fn equilibrium_constant(mech: &Mechanism, r: &Reaction, t: f64) -> Result<f64, MechanismError> {
    let mut g_rt = vec![0.0; mech.n_species()];
    for &(s, _) in r.reactants.iter().chain(&r.products) {
        g_rt[s] = mech.species[s].thermo_props(t)?.g_rt();
    }
    Ok(kc_from_gibbs(r, &g_rt, t))
}

fn mass_action(terms: &[(usize, u32)], c: &[f64]) -> f64 {
    terms
        .iter()
        .map(|&(s, nu)| if nu == 1 { c[s] } else { c[s].powi(nu as i32) })
        .product()
}

/// Reusable buffers for allocation-free rate evaluation.
#[derive(Debug, Clone, Default)]
pub struct RateWorkspace {
    pub eval: RateEvaluation,
    g_rt: Vec<f64>,
    conc: Vec<f64>,
}

impl RateWorkspace {
    pub fn new(mech: &Mechanism) -> Self {
        let nr = mech.reactions.len();
        let ns = mech.n_species();
        Self {
            eval: RateEvaluation {
                kf: vec![0.0; nr],
                kr: vec![0.0; nr],
                net_rates: vec![0.0; nr],
                production: vec![0.0; ns],
                clipped: false,
            },
            g_rt: vec![0.0; ns],
            conc: vec![0.0; ns],
        }
    }
}

/// Fills `ws.eval` for the given temperature and concentrations.
///
/// Thermo polynomials are evaluated without a range check so that
/// integrator excursions slightly outside the fit range stay smooth.
pub fn production_rates_into(mech: &Mechanism, t: f64, concentrations: &[f64], ws: &mut RateWorkspace) {
    ws.eval.clipped = false;
    for (dst, &c) in ws.conc.iter_mut().zip(concentrations) {
        if c < 0.0 {
            ws.eval.clipped = true;
            *dst = 0.0;
        } else {
            *dst = c;
        }
    }
    for (g, s) in ws.g_rt.iter_mut().zip(&mech.species) {
        *g = s.thermo.eval(t).g_rt();
    }
    ws.eval.production.iter_mut().for_each(|w| *w = 0.0);
    let c = &ws.conc;
    for (i, r) in mech.reactions.iter().enumerate() {
        let m_eff = r.rate.efficiencies().map_or(1.0, |e| third_body_conc(c, e));
        let kf = forward_constant(r, t, m_eff);
        let kr = if r.reversible {
            kf / kc_from_gibbs(r, &ws.g_rt, t)
        } else {
            0.0
        };
        let mut q = kf * mass_action(&r.reactants, c) - kr * mass_action(&r.products, c);
        if matches!(r.rate, RateModel::ThirdBody { .. }) {
            q *= m_eff;
        }
        ws.eval.kf[i] = kf;
        ws.eval.kr[i] = kr;
        ws.eval.net_rates[i] = q;
        for &(s, nu) in &r.reactants {
            ws.eval.production[s] -= f64::from(nu) * q;
        }
        for &(s, nu) in &r.products {
            ws.eval.production[s] += f64::from(nu) * q;
        }
    }
}

pub fn production_rates(mech: &Mechanism, state: &GasState) -> RateEvaluation {
    let mut ws = RateWorkspace::new(mech);
    production_rates_into(mech, state.temperature, &state.concentrations, &mut ws);
    ws.eval
}
