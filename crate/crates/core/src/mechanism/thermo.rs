/// Two-range NASA 7-coefficient polynomial fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NasaPoly7 {
    pub t_low: f64,
    pub t_mid: f64,
    pub t_high: f64,
    pub coeffs_low: [f64; 7],
    pub coeffs_high: [f64; 7],
}

/// Dimensionless standard-state properties at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoProps {
    pub cp_r: f64,
    pub h_rt: f64,
    pub s_r: f64,
}

impl ThermoProps {
    /// g/RT
    pub fn g_rt(&self) -> f64 {
        self.h_rt - self.s_r
    }
}

impl NasaPoly7 {
    /// Constant-cp fit with the given coefficients on both branches.
    pub fn constant(t_low: f64, t_mid: f64, t_high: f64, coeffs: [f64; 7]) -> Self {
        Self {
            t_low,
            t_mid,
            t_high,
            coeffs_low: coeffs,
            coeffs_high: coeffs,
        }
    }

    pub fn coeffs(&self, t: f64) -> &[f64; 7] {
        if t < self.t_mid {
            &self.coeffs_low
        } else {
            &self.coeffs_high
        }
    }

    /// Evaluates without a range check.
    pub fn eval(&self, t: f64) -> ThermoProps {
        Self::eval_branch(self.coeffs(t), t)
    }

    pub fn eval_branch(a: &[f64; 7], t: f64) -> ThermoProps {
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        ThermoProps {
            cp_r: a[0] + a[1] * t + a[2] * t2 + a[3] * t3 + a[4] * t4,
            h_rt: a[0]
                + a[1] * t / 2.0
                + a[2] * t2 / 3.0
                + a[3] * t3 / 4.0
                + a[4] * t4 / 5.0
                + a[5] / t,
            s_r: a[0] * t.ln()
                + a[1] * t
                + a[2] * t2 / 2.0
                + a[3] * t3 / 3.0
                + a[4] * t4 / 4.0
                + a[6],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::Mechanism;

    #[test]
    fn constant_polynomial() {
        let p = NasaPoly7::constant(200.0, 1000.0, 3000.0, [3.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for t in [200.0, 500.0, 1000.0, 2999.0] {
            assert_eq!(p.eval(t).cp_r, 3.5);
            assert_eq!(p.eval(t).h_rt, 3.5);
        }
    }

    #[test]
    fn branches_agree_at_t_mid() {
        for s in Mechanism::baseline().species {
            let th = &s.thermo;
            let lo = NasaPoly7::eval_branch(&th.coeffs_low, th.t_mid).cp_r;
            let hi = NasaPoly7::eval_branch(&th.coeffs_high, th.t_mid).cp_r;
            assert!(((lo - hi) / hi).abs() < 1e-4, "{}: {lo} vs {hi}", s.name);
        }
    }

    #[test]
    fn h2o_at_1000k_matches_horner_oracle() {
        // Oracle: Horner evaluation of the high branch, written out independently.
        let a = [
            3.03399249,
            0.00217691804,
            -1.64072518e-07,
            -9.7041987e-11,
            1.68200992e-14,
            -30004.2971,
            4.9667701,
        ];
        let t = 1000.0_f64;
        let cp = (((a[4] * t + a[3]) * t + a[2]) * t + a[1]) * t + a[0];
        let h = ((((a[4] / 5.0 * t + a[3] / 4.0) * t + a[2] / 3.0) * t + a[1] / 2.0) * t + a[0])
            + a[5] / t;
        let s = a[0] * t.ln() + (((a[4] / 4.0 * t + a[3] / 3.0) * t + a[2] / 2.0) * t + a[1]) * t + a[6];

        let mech = Mechanism::baseline();
        let h2o = &mech.species[mech.species_index("H2O").unwrap()];
        let p = h2o.thermo_props(t).unwrap();
        assert!(((p.cp_r - cp) / cp).abs() < 1e-13);
        assert!(((p.h_rt - h) / h).abs() < 1e-12);
        assert!(((p.s_r - s) / s).abs() < 1e-13);
    }
}
