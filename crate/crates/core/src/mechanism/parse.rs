//! Line-oriented mechanism file format.
//!
//! ```text
//! [species]
//! H2  M=2.016  elems=H:2  thermo=H2
//! [thermo]
//! H2  200 1000 3500  <7 low coeffs>  <7 high coeffs>
//! [reactions]
//! R1: H + O2 = O + OH | A=1.04e14 beta=0 Ea=15286
//! ```
//!
//! `#` starts a comment. Reaction options after `|`: `dup`,
//! `tb: SP:eff,...`, `falloff: Alow=.. betalow=.. Ealow=.. troe_fc=..`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    atomic_mass, Arrhenius, Efficiencies, Mechanism, MechanismError, NasaPoly7, RateModel,
    Reaction, Species,
};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Species,
    Thermo,
    Reactions,
}

struct PendingSpecies {
    name: String,
    molar_mass: f64,
    elements: BTreeMap<String, u32>,
    thermo_key: String,
    line: usize,
    bath: bool,
}

struct PendingReaction {
    id: String,
    line: usize,
    column: usize,
    reactants: Vec<(String, u32)>,
    products: Vec<(String, u32)>,
    reversible: bool,
    third_body: bool,
    falloff_marker: bool,
    arrhenius: Arrhenius,
    dup: bool,
    efficiencies: Vec<(String, f64)>,
    falloff: Option<(Arrhenius, f64)>,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> MechanismError {
    MechanismError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// 1-based column of `needle` inside `line`, falling back to 1.
fn column_of(line: &str, needle: &str) -> usize {
    line.find(needle).map_or(1, |p| p + 1)
}

fn parse_f64(raw: &str, line_no: usize, line: &str) -> Result<f64, MechanismError> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| syntax(line_no, column_of(line, raw), format!("invalid number '{raw}'")))
}

pub fn parse_mechanism(text: &str) -> Result<Mechanism, MechanismError> {
    let mut section = Section::None;
    let mut species: Vec<PendingSpecies> = Vec::new();
    let mut thermo: BTreeMap<String, NasaPoly7> = BTreeMap::new();
    let mut reactions: Vec<PendingReaction> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("");
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('[') {
            section = match trimmed {
                "[species]" => Section::Species,
                "[thermo]" => Section::Thermo,
                "[reactions]" => Section::Reactions,
                other => {
                    return Err(syntax(
                        line_no,
                        column_of(line, other),
                        format!("unknown section {other}"),
                    ))
                }
            };
            continue;
        }
        match section {
            Section::None => {
                return Err(syntax(line_no, 1, "content before first section header"));
            }
            Section::Species => species.push(parse_species_line(line, line_no)?),
            Section::Thermo => {
                let (key, poly) = parse_thermo_line(line, line_no)?;
                if thermo.insert(key.clone(), poly).is_some() {
                    return Err(syntax(line_no, 1, format!("duplicate thermo entry {key}")));
                }
            }
            Section::Reactions => reactions.push(parse_reaction_line(line, line_no)?),
        }
    }

    if species.is_empty() {
        return Err(MechanismError::NoSpecies);
    }

    let mut resolved: Vec<Species> = Vec::with_capacity(species.len());
    let mut default_bath = None;
    for (i, ps) in species.into_iter().enumerate() {
        if resolved.iter().any(|s| s.name == ps.name) {
            return Err(syntax(ps.line, 1, format!("duplicate species {}", ps.name)));
        }
        let poly = thermo
            .get(&ps.thermo_key)
            .cloned()
            .ok_or_else(|| MechanismError::InvalidSpecies {
                species: ps.name.clone(),
                message: format!("no thermo entry '{}'", ps.thermo_key),
            })?;
        let mut mass = 0.0;
        for (e, &n) in &ps.elements {
            let m = atomic_mass(e).ok_or_else(|| MechanismError::InvalidSpecies {
                species: ps.name.clone(),
                message: format!("unknown element {e}"),
            })?;
            mass += m * f64::from(n);
        }
        if !(ps.molar_mass > 0.0) || ((mass - ps.molar_mass) / mass).abs() > 1e-3 {
            return Err(MechanismError::InvalidSpecies {
                species: ps.name.clone(),
                message: format!(
                    "molar mass {} inconsistent with elements ({mass})",
                    ps.molar_mass
                ),
            });
        }
        if ps.bath {
            default_bath = Some(i);
        }
        resolved.push(Species {
            name: ps.name,
            molar_mass: ps.molar_mass,
            elements: ps.elements,
            thermo: poly,
        });
    }

    let lookup = |reaction: &str, name: &str| -> Result<usize, MechanismError> {
        resolved
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| MechanismError::UnknownSpecies {
                reaction: reaction.to_string(),
                species: name.to_string(),
            })
    };

    let mut out: Vec<Reaction> = Vec::new();
    for pr in reactions {
        let resolve_side = |side: &[(String, u32)]| -> Result<Vec<(usize, u32)>, MechanismError> {
            let mut v: Vec<(usize, u32)> = Vec::new();
            for (name, c) in side {
                let s = lookup(&pr.id, name)?;
                match v.iter_mut().find(|(i, _)| *i == s) {
                    Some(slot) => slot.1 += c,
                    None => v.push((s, *c)),
                }
            }
            Ok(v)
        };
        let reactants = resolve_side(&pr.reactants)?;
        let products = resolve_side(&pr.products)?;

        if !(pr.arrhenius.a > 0.0) {
            return Err(MechanismError::NonPositiveA { reaction: pr.id });
        }

        if pr.dup {
            let Some(prev) = out.iter_mut().find(|r| r.id == pr.id) else {
                return Err(syntax(
                    pr.line,
                    pr.column,
                    format!("'dup' line {} has no preceding reaction with that id", pr.id),
                ));
            };
            if prev.reactants != reactants || prev.products != products {
                return Err(MechanismError::InvalidReaction {
                    reaction: pr.id,
                    message: "duplicate line has different stoichiometry".into(),
                });
            }
            if !matches!(prev.rate, RateModel::Elementary(_))
                || pr.third_body
                || pr.falloff_marker
                || !pr.efficiencies.is_empty()
                || pr.falloff.is_some()
            {
                return Err(MechanismError::InvalidReaction {
                    reaction: pr.id,
                    message: "duplicates are supported for elementary reactions only".into(),
                });
            }
            prev.duplicates.push(pr.arrhenius);
            continue;
        }
        if out.iter().any(|r| r.id == pr.id) {
            return Err(syntax(
                pr.line,
                pr.column,
                format!("reaction id {} repeated without 'dup'", pr.id),
            ));
        }

        let mut efficiencies = Efficiencies::default();
        for (name, e) in &pr.efficiencies {
            let s = lookup(&pr.id, name)?;
            if !(*e >= 0.0) {
                return Err(MechanismError::InvalidReaction {
                    reaction: pr.id.clone(),
                    message: format!("negative efficiency for {name}"),
                });
            }
            efficiencies.set(s, *e);
        }

        let rate = match (pr.falloff_marker, pr.third_body, pr.falloff) {
            (true, _, Some((low, fc))) => {
                if !(fc > 0.0 && fc <= 1.0) {
                    return Err(MechanismError::InvalidReaction {
                        reaction: pr.id,
                        message: format!("troe_fc {fc} outside (0, 1]"),
                    });
                }
                if !(low.a > 0.0) {
                    return Err(MechanismError::NonPositiveA { reaction: pr.id });
                }
                RateModel::Falloff {
                    high: pr.arrhenius,
                    low,
                    troe_fc: fc,
                    efficiencies,
                }
            }
            (true, _, None) => {
                return Err(MechanismError::InvalidReaction {
                    reaction: pr.id,
                    message: "(+M) reaction needs a falloff: block".into(),
                })
            }
            (false, _, Some(_)) => {
                return Err(MechanismError::InvalidReaction {
                    reaction: pr.id,
                    message: "falloff: block requires (+M) in the equation".into(),
                })
            }
            (false, true, None) => RateModel::ThirdBody {
                rate: pr.arrhenius,
                efficiencies,
            },
            (false, false, None) => {
                if !pr.efficiencies.is_empty() {
                    return Err(MechanismError::InvalidReaction {
                        reaction: pr.id,
                        message: "tb: given for a reaction without M".into(),
                    });
                }
                RateModel::Elementary(pr.arrhenius)
            }
        };

        let reaction = Reaction {
            id: pr.id,
            reactants,
            products,
            reversible: pr.reversible,
            rate,
            duplicates: Vec::new(),
        };
        check_balance(&resolved, &reaction)?;
        out.push(reaction);
    }

    Ok(Mechanism {
        species: resolved,
        reactions: out,
        default_bath,
    })
}

fn check_balance(species: &[Species], r: &Reaction) -> Result<(), MechanismError> {
    let mut net: BTreeMap<&str, i64> = BTreeMap::new();
    for &(s, c) in &r.reactants {
        for (e, &n) in &species[s].elements {
            *net.entry(e).or_default() -= i64::from(n) * i64::from(c);
        }
    }
    for &(s, c) in &r.products {
        for (e, &n) in &species[s].elements {
            *net.entry(e).or_default() += i64::from(n) * i64::from(c);
        }
    }
    match net.into_iter().find(|(_, v)| *v != 0) {
        Some((e, _)) => Err(MechanismError::ElementImbalance {
            reaction: r.id.clone(),
            element: e.to_string(),
        }),
        None => Ok(()),
    }
}

fn parse_species_line(line: &str, line_no: usize) -> Result<PendingSpecies, MechanismError> {
    let mut tokens = line.split_whitespace();
    let name = tokens.next().unwrap_or_default().to_string();
    let mut molar_mass = None;
    let mut elements = BTreeMap::new();
    let mut thermo_key = None;
    let mut bath = false;
    for tok in tokens {
        if let Some(v) = tok.strip_prefix("M=") {
            molar_mass = Some(parse_f64(v, line_no, line)?);
        } else if let Some(v) = tok.strip_prefix("elems=") {
            for pair in v.split(',') {
                let (e, n) = pair.split_once(':').ok_or_else(|| {
                    syntax(line_no, column_of(line, pair), format!("bad element entry '{pair}'"))
                })?;
                let n: u32 = n.parse().map_err(|_| {
                    syntax(line_no, column_of(line, pair), format!("bad element count '{n}'"))
                })?;
                elements.insert(e.to_ascii_uppercase(), n);
            }
        } else if let Some(v) = tok.strip_prefix("thermo=") {
            thermo_key = Some(v.to_string());
        } else if tok == "bath" {
            bath = true;
        } else {
            return Err(syntax(
                line_no,
                column_of(line, tok),
                format!("unexpected token '{tok}' in species entry"),
            ));
        }
    }
    let molar_mass = molar_mass
        .ok_or_else(|| syntax(line_no, column_of(line, &name), "species entry missing M="))?;
    if elements.is_empty() || elements.values().all(|&n| n == 0) {
        return Err(syntax(
            line_no,
            column_of(line, &name),
            "species entry needs at least one positive element count",
        ));
    }
    Ok(PendingSpecies {
        thermo_key: thermo_key.unwrap_or_else(|| name.clone()),
        name,
        molar_mass,
        elements,
        line: line_no,
        bath,
    })
}

fn parse_thermo_line(line: &str, line_no: usize) -> Result<(String, NasaPoly7), MechanismError> {
    let mut tokens = line.split_whitespace();
    let key = tokens.next().unwrap_or_default().to_string();
    let values = tokens
        .map(|t| parse_f64(t, line_no, line))
        .collect::<Result<Vec<f64>, _>>()?;
    if values.len() != 17 {
        return Err(syntax(
            line_no,
            column_of(line, &key),
            format!("thermo row needs 3 temperatures and 14 coefficients, found {}", values.len()),
        ));
    }
    let (t_low, t_mid, t_high) = (values[0], values[1], values[2]);
    if !(t_low < t_mid && t_mid < t_high) {
        return Err(syntax(line_no, column_of(line, &key), "require t_low < t_mid < t_high"));
    }
    let mut coeffs_low = [0.0; 7];
    let mut coeffs_high = [0.0; 7];
    coeffs_low.copy_from_slice(&values[3..10]);
    coeffs_high.copy_from_slice(&values[10..17]);
    Ok((
        key,
        NasaPoly7 {
            t_low,
            t_mid,
            t_high,
            coeffs_low,
            coeffs_high,
        },
    ))
}

type Side = Vec<(String, u32)>;

/// Parses one side of an equation. Returns the species terms and whether a bare `M` appeared.
fn parse_side(
    side: &str,
    line: &str,
    line_no: usize,
) -> Result<(Side, bool), MechanismError> {
    let mut terms = Vec::new();
    let mut has_m = false;
    for term in side.split('+') {
        let term = term.trim();
        if term.is_empty() {
            return Err(syntax(line_no, column_of(line, side.trim()), "empty term in equation"));
        }
        let digits: String = term.chars().take_while(|c| c.is_ascii_digit()).collect();
        let name = term[digits.len()..].trim();
        let coeff: u32 = if digits.is_empty() {
            1
        } else {
            digits
                .parse()
                .map_err(|_| syntax(line_no, column_of(line, term), "bad coefficient"))?
        };
        if name.is_empty() || name.contains(char::is_whitespace) || coeff == 0 {
            return Err(syntax(
                line_no,
                column_of(line, term),
                format!("malformed term '{term}'"),
            ));
        }
        if name == "M" {
            if coeff != 1 || has_m {
                return Err(syntax(line_no, column_of(line, term), "malformed third body"));
            }
            has_m = true;
        } else {
            terms.push((name.to_string(), coeff));
        }
    }
    Ok((terms, has_m))
}

fn parse_reaction_line(line: &str, line_no: usize) -> Result<PendingReaction, MechanismError> {
    let (id, rest) = line
        .split_once(':')
        .ok_or_else(|| syntax(line_no, 1, "reaction line must start with '<id>:'"))?;
    let id = id.trim().to_string();
    if id.is_empty() || id.contains(char::is_whitespace) {
        return Err(syntax(line_no, 1, "invalid reaction id"));
    }
    let (equation, options) = rest.split_once('|').ok_or_else(|| {
        syntax(line_no, column_of(line, rest.trim()), "missing '|' before rate parameters")
    })?;

    let mut eq = equation.to_string();
    let falloff_marker = eq.contains("(+M)");
    eq = eq.replace("(+M)", " ");

    let (lhs, rhs, reversible) = if let Some((l, r)) = eq.split_once("<=>") {
        (l.to_string(), r.to_string(), true)
    } else if let Some((l, r)) = eq.split_once("=>") {
        (l.to_string(), r.to_string(), false)
    } else if let Some((l, r)) = eq.split_once('=') {
        (l.to_string(), r.to_string(), true)
    } else {
        return Err(syntax(
            line_no,
            column_of(line, equation.trim()),
            "equation has no '=' separator",
        ));
    };
    let (reactants, m_left) = parse_side(&lhs, line, line_no)?;
    let (products, m_right) = parse_side(&rhs, line, line_no)?;
    if m_left != m_right {
        return Err(syntax(
            line_no,
            column_of(line, equation.trim()),
            "third body M must appear on both sides",
        ));
    }
    if falloff_marker && m_left {
        return Err(syntax(
            line_no,
            column_of(line, equation.trim()),
            "cannot combine (+M) and M",
        ));
    }

    let mut a = None;
    let mut beta = None;
    let mut ea = None;
    let mut dup = false;
    let mut efficiencies = Vec::new();
    let mut falloff = None;

    let tokens: Vec<&str> = options.split_whitespace().collect();
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        if let Some(v) = tok.strip_prefix("A=") {
            a = Some(parse_f64(v, line_no, line)?);
        } else if let Some(v) = tok.strip_prefix("beta=") {
            beta = Some(parse_f64(v, line_no, line)?);
        } else if let Some(v) = tok.strip_prefix("Ea=") {
            ea = Some(parse_f64(v, line_no, line)?);
        } else if tok == "dup" {
            dup = true;
        } else if tok == "tb:" {
            i += 1;
            let list = tokens
                .get(i)
                .ok_or_else(|| syntax(line_no, column_of(line, "tb:"), "tb: needs a list"))?;
            for pair in list.split(',') {
                let (sp, eff) = pair.split_once(':').ok_or_else(|| {
                    syntax(line_no, column_of(line, pair), format!("bad efficiency '{pair}'"))
                })?;
                efficiencies.push((sp.to_string(), parse_f64(eff, line_no, line)?));
            }
        } else if tok == "falloff:" {
            let mut alow = None;
            let mut betalow = None;
            let mut ealow = None;
            let mut fc = None;
            while let Some((key, v)) = tokens.get(i + 1).and_then(|t| t.split_once('=')) {
                let slot = match key {
                    "Alow" => &mut alow,
                    "betalow" => &mut betalow,
                    "Ealow" => &mut ealow,
                    "troe_fc" => &mut fc,
                    _ => break,
                };
                *slot = Some(parse_f64(v, line_no, line)?);
                i += 1;
            }
            let col = column_of(line, "falloff:");
            let need = |v: Option<f64>, what: &str| {
                v.ok_or_else(|| syntax(line_no, col, format!("falloff: missing {what}")))
            };
            falloff = Some((
                Arrhenius::new(need(alow, "Alow")?, need(betalow, "betalow")?, need(ealow, "Ealow")?),
                need(fc, "troe_fc")?,
            ));
        } else {
            return Err(syntax(
                line_no,
                column_of(line, tok),
                format!("unexpected token '{tok}'"),
            ));
        }
        i += 1;
    }
    let col = column_of(line, options.trim());
    let a = a.ok_or_else(|| syntax(line_no, col, "missing A="))?;
    let beta = beta.ok_or_else(|| syntax(line_no, col, "missing beta="))?;
    let ea = ea.ok_or_else(|| syntax(line_no, col, "missing Ea="))?;

    Ok(PendingReaction {
        id,
        line: line_no,
        column: 1,
        reactants,
        products,
        reversible,
        third_body: m_left,
        falloff_marker,
        arrhenius: Arrhenius::new(a, beta, ea),
        dup,
        efficiencies,
        falloff,
    })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_eff(out: &mut String, mech: &Mechanism, eff: &Efficiencies) {
    if eff.0.is_empty() {
        return;
    }
    let list: Vec<String> = eff
        .0
        .iter()
        .map(|&(s, e)| format!("{}:{}", mech.species[s].name, num(e)))
        .collect();
    let _ = write!(out, " tb: {}", list.join(","));
}

/// Writes a mechanism in the same format `parse_mechanism` reads, with 17 significant digits.
pub fn serialize_mechanism(mech: &Mechanism) -> String {
    let mut out = String::new();
    out.push_str("[species]\n");
    for (i, s) in mech.species.iter().enumerate() {
        let elems: Vec<String> = s.elements.iter().map(|(e, n)| format!("{e}:{n}")).collect();
        let _ = write!(
            out,
            "{} M={} elems={} thermo={}",
            s.name,
            num(s.molar_mass),
            elems.join(","),
            s.name
        );
        if mech.default_bath == Some(i) {
            out.push_str(" bath");
        }
        out.push('\n');
    }
    out.push_str("\n[thermo]\n");
    for s in &mech.species {
        let th = &s.thermo;
        let _ = write!(out, "{} {} {} {}", s.name, num(th.t_low), num(th.t_mid), num(th.t_high));
        for c in th.coeffs_low.iter().chain(th.coeffs_high.iter()) {
            let _ = write!(out, " {}", num(*c));
        }
        out.push('\n');
    }
    out.push_str("\n[reactions]\n");
    for r in &mech.reactions {
        let eqn = mech.equation(r);
        let arr = |a: &Arrhenius| format!("A={} beta={} Ea={}", num(a.a), num(a.beta), num(a.ea));
        let _ = write!(out, "{}: {} | {}", r.id, eqn, arr(r.rate.primary()));
        match &r.rate {
            RateModel::Elementary(_) => {}
            RateModel::ThirdBody { efficiencies, .. } => write_eff(&mut out, mech, efficiencies),
            RateModel::Falloff {
                low,
                troe_fc,
                efficiencies,
                ..
            } => {
                let _ = write!(
                    out,
                    " falloff: Alow={} betalow={} Ealow={} troe_fc={}",
                    num(low.a),
                    num(low.beta),
                    num(low.ea),
                    num(*troe_fc)
                );
                write_eff(&mut out, mech, efficiencies);
            }
        }
        out.push('\n');
        for d in &r.duplicates {
            let _ = writeln!(out, "{}: {} | {} dup", r.id, eqn, arr(d));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = "\
[species]
H2 M=2.016 elems=H:2 thermo=H2
H  M=1.008 elems=H:1
[thermo]
H2 200 1000 3500 3.5 0 0 0 0 -1000 1  3.5 0 0 0 0 -1000 1
H  200 1000 3500 2.5 0 0 0 0 25000 0  2.5 0 0 0 0 25000 0
[reactions]
D1: H2 + M = 2 H + M | A=1e14 beta=0 Ea=90000
";

    #[test]
    fn r1_values_exact() {
        let mech = Mechanism::baseline();
        let r1 = mech.reaction("R1").unwrap();
        assert_eq!(*r1.rate.primary(), Arrhenius::new(1.04e14, 0.0, 15286.0));
        assert!(r1.reversible);
        assert_eq!(mech.equation(r1), "H + O2 = O + OH");
    }

    #[test]
    fn r14_duplicates_grouped() {
        let mech = Mechanism::baseline();
        let r14 = mech.reaction("R14").unwrap();
        let sets: Vec<_> = r14.arrhenius_sets().copied().collect();
        assert_eq!(
            sets,
            vec![
                Arrhenius::new(4.2e14, 0.0, 11982.0),
                Arrhenius::new(1.3e11, 0.0, -1630.0)
            ]
        );
        assert_eq!(mech.reactions.iter().filter(|r| r.id == "R14").count(), 1);
    }

    #[test]
    fn empty_species_block() {
        let err = parse_mechanism("[species]\n[thermo]\n[reactions]\n").unwrap_err();
        assert_eq!(err, MechanismError::NoSpecies);
        assert_eq!(err.to_string(), "no species defined");
    }

    #[test]
    fn unknown_species() {
        let text = MINI.replace("D1: H2 + M = 2 H + M", "D1: H2 + M = 2 X + M");
        assert!(matches!(
            parse_mechanism(&text),
            Err(MechanismError::UnknownSpecies { species, .. }) if species == "X"
        ));
    }

    #[test]
    fn imbalance_names_reaction() {
        let text = MINI.replace("2 H + M", "H + M");
        let err = parse_mechanism(&text).unwrap_err();
        assert_eq!(
            err,
            MechanismError::ElementImbalance {
                reaction: "D1".into(),
                element: "H".into()
            }
        );
    }

    #[test]
    fn non_positive_a() {
        let text = MINI.replace("A=1e14", "A=-1e14");
        assert!(matches!(parse_mechanism(&text), Err(MechanismError::NonPositiveA { .. })));
        let text = MINI.replace("A=1e14", "A=0");
        assert!(matches!(parse_mechanism(&text), Err(MechanismError::NonPositiveA { .. })));
    }

    #[test]
    fn syntax_error_location() {
        let text = MINI.replace("beta=0 Ea=90000", "beta=zero Ea=90000");
        match parse_mechanism(&text).unwrap_err() {
            MechanismError::Syntax { line, column, .. } => {
                assert_eq!(line, 8);
                assert_eq!(column, "D1: H2 + M = 2 H + M | A=1e14 beta=".len() + 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn repeated_id_without_dup() {
        let text = format!("{MINI}D1: H2 + M = 2 H + M | A=1e13 beta=0 Ea=0\n");
        assert!(matches!(parse_mechanism(&text), Err(MechanismError::Syntax { .. })));
    }

    #[test]
    fn scientific_notation_and_mini_parse() {
        let mech = parse_mechanism(MINI).unwrap();
        assert_eq!(mech.reactions.len(), 1);
        assert!(matches!(mech.reactions[0].rate, RateModel::ThirdBody { .. }));
        assert_eq!(mech.species[1].thermo.coeffs_low[0], 2.5);
    }

    #[test]
    fn baseline_roundtrip() {
        let mech = Mechanism::baseline();
        let again = parse_mechanism(&serialize_mechanism(&mech)).unwrap();
        assert_eq!(mech, again);
    }
}
