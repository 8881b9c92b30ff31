//! Patient XML documents.
//!
//! ```xml
//! <?xml version="1.0" encoding="UTF-8"?>
//! <patient id="p-01" schema="1">
//!   <amblyopicEye>right</amblyopicEye>
//!   <born>2017</born>
//!   <acuity lazy="0.3" fellow="1"/>
//!   <therapy attenuation="0.8" sharedMin="0.1">
//!     <game baseSpeed="1" speedMin="0.5" speedMax="4" invaders="both"/>
//!   </therapy>
//!   <squint dx="10" dy="0" pitchMm="0.25" distanceMm="500"/>
//! </patient>
//! ```
//!
//! Element order is fixed. `born`, `acuity`, `game` and `squint` are optional.
//! Unknown elements and attributes are rejected.

use std::fmt::Write as _;

use roxmltree::{Document, Node};

use crate::diagnostics::{squint_offset_to_angle, SquintMeasurement};
use crate::stereo::{EyeAssignment, EyeSide, DEFAULT_MIN_SHARED_RATIO};

use super::PersistenceError;

pub const SCHEMA_VERSION: &str = "1";

pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Clinic-entered decimal acuities. Informational only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Acuity {
    pub lazy: f64,
    pub fellow: f64,
}

/// Per-patient game tuning layered over the default game config.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GameOverrides {
    pub base_speed: Option<f64>,
    pub speed_min: Option<f64>,
    pub speed_max: Option<f64>,
    pub invaders: Option<EyeAssignment>,
}

impl GameOverrides {
    pub fn is_empty(&self) -> bool {
        *self == GameOverrides::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TherapySettings {
    pub fellow_attenuation: f64,
    pub min_shared_ratio: f64,
    pub game: GameOverrides,
}

impl Default for TherapySettings {
    fn default() -> Self {
        TherapySettings {
            fellow_attenuation: 1.0,
            min_shared_ratio: DEFAULT_MIN_SHARED_RATIO,
            game: GameOverrides::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatientProfile {
    pub id: String,
    pub amblyopic_eye: EyeSide,
    pub birth_year: Option<i32>,
    pub acuity: Option<Acuity>,
    pub therapy: TherapySettings,
    pub squint_calibration: Option<SquintMeasurement>,
}

impl PatientProfile {
    pub fn new(id: impl Into<String>, amblyopic_eye: EyeSide) -> Self {
        PatientProfile {
            id: id.into(),
            amblyopic_eye,
            birth_year: None,
            acuity: None,
            therapy: TherapySettings::default(),
            squint_calibration: None,
        }
    }

    pub fn validate(&self) -> Result<(), PersistenceError> {
        if !is_valid_id(&self.id) {
            return Err(PersistenceError::InvalidId(self.id.clone()));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.therapy.fellow_attenuation) {
            return Err(PersistenceError::schema("/patient/therapy/@attenuation", "outside [0, 1]"));
        }
        if !unit(self.therapy.min_shared_ratio) {
            return Err(PersistenceError::schema("/patient/therapy/@sharedMin", "outside [0, 1]"));
        }
        if let Some(a) = self.acuity {
            for (name, v) in [("lazy", a.lazy), ("fellow", a.fellow)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(PersistenceError::schema(
                        format!("/patient/acuity/@{name}"),
                        "must be a finite non-negative decimal",
                    ));
                }
            }
        }
        let g = self.therapy.game;
        for (name, v) in [("baseSpeed", g.base_speed), ("speedMin", g.speed_min), ("speedMax", g.speed_max)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(PersistenceError::schema(
                        format!("/patient/therapy/game/@{name}"),
                        "must be positive",
                    ));
                }
            }
        }
        if let Some(s) = &self.squint_calibration {
            if !(s.pixel_pitch_mm.is_finite() && s.pixel_pitch_mm > 0.0)
                || !(s.viewing_distance_mm.is_finite() && s.viewing_distance_mm > 0.0)
            {
                return Err(PersistenceError::schema("/patient/squint", "geometry must be positive"));
            }
        }
        Ok(())
    }
}

/// Serializes `profile` to the canonical UTF-8 document.
pub fn save_patient(profile: &PatientProfile) -> Result<Vec<u8>, PersistenceError> {
    profile.validate()?;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<patient id=\"{}\" schema=\"{SCHEMA_VERSION}\">", profile.id);
    let _ = writeln!(out, "  <amblyopicEye>{}</amblyopicEye>", profile.amblyopic_eye);
    if let Some(year) = profile.birth_year {
        let _ = writeln!(out, "  <born>{year}</born>");
    }
    if let Some(a) = profile.acuity {
        let _ = writeln!(out, "  <acuity lazy=\"{}\" fellow=\"{}\"/>", a.lazy, a.fellow);
    }
    let t = &profile.therapy;
    let _ = write!(
        out,
        "  <therapy attenuation=\"{}\" sharedMin=\"{}\"",
        t.fellow_attenuation, t.min_shared_ratio
    );
    if t.game.is_empty() {
        out.push_str("/>\n");
    } else {
        out.push_str(">\n    <game");
        let g = t.game;
        for (name, v) in [("baseSpeed", g.base_speed), ("speedMin", g.speed_min), ("speedMax", g.speed_max)] {
            if let Some(v) = v {
                let _ = write!(out, " {name}=\"{v}\"");
            }
        }
        if let Some(a) = g.invaders {
            let _ = write!(out, " invaders=\"{}\"", a.as_str());
        }
        out.push_str("/>\n  </therapy>\n");
    }
    if let Some(s) = &profile.squint_calibration {
        let _ = writeln!(
            out,
            "  <squint dx=\"{}\" dy=\"{}\" pitchMm=\"{}\" distanceMm=\"{}\"/>",
            s.offset_px.0, s.offset_px.1, s.pixel_pitch_mm, s.viewing_distance_mm
        );
    }
    out.push_str("</patient>\n");
    Ok(out.into_bytes())
}

const PATIENT_CHILDREN: [(&str, bool); 5] = [
    ("amblyopicEye", true),
    ("born", false),
    ("acuity", false),
    ("therapy", true),
    ("squint", false),
];

pub fn load_patient(bytes: &[u8]) -> Result<PatientProfile, PersistenceError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| PersistenceError::schema("/", format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| PersistenceError::schema("/", e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "patient" || root.tag_name().namespace().is_some() {
        return Err(PersistenceError::schema(
            format!("/{}", root.tag_name().name()),
            "root element must be <patient>",
        ));
    }
    check_attributes(root, "/patient", &["id", "schema"])?;
    let schema = required_attr(root, "/patient", "schema")?;
    if schema != SCHEMA_VERSION {
        return Err(PersistenceError::schema(
            "/patient/@schema",
            format!("unsupported schema version `{schema}`"),
        ));
    }
    let id = required_attr(root, "/patient", "id")?;
    if !is_valid_id(id) {
        return Err(PersistenceError::schema("/patient/@id", format!("invalid id `{id}`")));
    }

    let children = ordered_children(root, "/patient", &PATIENT_CHILDREN)?;
    let [eye, born, acuity, therapy, squint] = children;

    let eye_node = eye.expect("required child present");
    let amblyopic_eye = text_of(eye_node, "/patient/amblyopicEye")?
        .parse::<EyeSide>()
        .map_err(|e| PersistenceError::schema("/patient/amblyopicEye", e))?;

    let birth_year = born
        .map(|n| parse_num::<i32>(text_of(n, "/patient/born")?, "/patient/born"))
        .transpose()?;

    let acuity = acuity
        .map(|n| -> Result<Acuity, PersistenceError> {
            let p = "/patient/acuity";
            check_leaf(n, p, &["lazy", "fellow"])?;
            Ok(Acuity {
                lazy: parse_num(required_attr(n, p, "lazy")?, &format!("{p}/@lazy"))?,
                fellow: parse_num(required_attr(n, p, "fellow")?, &format!("{p}/@fellow"))?,
            })
        })
        .transpose()?;

    let therapy = parse_therapy(therapy.expect("required child present"))?;

    let squint_calibration = squint
        .map(|n| -> Result<SquintMeasurement, PersistenceError> {
            let p = "/patient/squint";
            check_leaf(n, p, &["dx", "dy", "pitchMm", "distanceMm"])?;
            let num = |a: &str| -> Result<f64, PersistenceError> {
                parse_num(required_attr(n, p, a)?, &format!("{p}/@{a}"))
            };
            let dx = parse_num::<i32>(required_attr(n, p, "dx")?, &format!("{p}/@dx"))?;
            let dy = parse_num::<i32>(required_attr(n, p, "dy")?, &format!("{p}/@dy"))?;
            squint_offset_to_angle((dx, dy), num("pitchMm")?, num("distanceMm")?)
                .map_err(|e| PersistenceError::schema(p, e.to_string()))
        })
        .transpose()?;

    let profile = PatientProfile {
        id: id.to_string(),
        amblyopic_eye,
        birth_year,
        acuity,
        therapy,
        squint_calibration,
    };
    profile.validate()?;
    Ok(profile)
}

fn parse_therapy(n: Node) -> Result<TherapySettings, PersistenceError> {
    let p = "/patient/therapy";
    check_attributes(n, p, &["attenuation", "sharedMin"])?;
    let [game] = ordered_children(n, p, &[("game", false)])?;
    let game = game
        .map(|g| -> Result<GameOverrides, PersistenceError> {
            let gp = "/patient/therapy/game";
            check_leaf(g, gp, &["baseSpeed", "speedMin", "speedMax", "invaders"])?;
            let opt = |a: &str| -> Result<Option<f64>, PersistenceError> {
                g.attribute(a)
                    .map(|v| parse_num(v, &format!("{gp}/@{a}")))
                    .transpose()
            };
            Ok(GameOverrides {
                base_speed: opt("baseSpeed")?,
                speed_min: opt("speedMin")?,
                speed_max: opt("speedMax")?,
                invaders: g
                    .attribute("invaders")
                    .map(|v| {
                        v.parse::<EyeAssignment>()
                            .map_err(|e| PersistenceError::schema(format!("{gp}/@invaders"), e))
                    })
                    .transpose()?,
            })
        })
        .transpose()?
        .unwrap_or_default();
    Ok(TherapySettings {
        fellow_attenuation: parse_num(required_attr(n, p, "attenuation")?, &format!("{p}/@attenuation"))?,
        min_shared_ratio: parse_num(required_attr(n, p, "sharedMin")?, &format!("{p}/@sharedMin"))?,
        game,
    })
}

fn required_attr<'a>(n: Node<'a, '_>, path: &str, name: &str) -> Result<&'a str, PersistenceError> {
    n.attribute(name)
        .ok_or_else(|| PersistenceError::schema(format!("{path}/@{name}"), "missing attribute"))
}

fn check_attributes(n: Node, path: &str, allowed: &[&str]) -> Result<(), PersistenceError> {
    for a in n.attributes() {
        if a.namespace().is_some() || !allowed.contains(&a.name()) {
            return Err(PersistenceError::schema(
                format!("{path}/@{}", a.name()),
                "unknown attribute",
            ));
        }
    }
    Ok(())
}

/// Attribute-only element with no children.
fn check_leaf(n: Node, path: &str, allowed: &[&str]) -> Result<(), PersistenceError> {
    check_attributes(n, path, allowed)?;
    if let Some(c) = n.children().find(|c| !is_ignorable(c)) {
        return Err(PersistenceError::schema(
            child_path(path, &c),
            "unexpected content in empty element",
        ));
    }
    Ok(())
}

fn text_of<'a>(n: Node<'a, '_>, path: &str) -> Result<&'a str, PersistenceError> {
    check_attributes(n, path, &[])?;
    if n.children().any(|c| c.is_element()) {
        return Err(PersistenceError::schema(path, "expected text only"));
    }
    Ok(n.text().unwrap_or("").trim())
}

fn parse_num<T: std::str::FromStr>(s: &str, path: &str) -> Result<T, PersistenceError> {
    s.trim()
        .parse()
        .map_err(|_| PersistenceError::schema(path, format!("cannot parse `{s}`")))
}

fn is_ignorable(n: &Node) -> bool {
    n.is_comment()
        || n.is_pi()
        || (n.is_text() && n.text().is_some_and(|t| t.trim().is_empty()))
}

fn child_path(parent: &str, n: &Node) -> String {
    if n.is_element() {
        format!("{parent}/{}", n.tag_name().name())
    } else {
        format!("{parent}/text()")
    }
}

/// Matches element children against `spec` (name, required) in order.
fn ordered_children<'a, 'i, const N: usize>(
    parent: Node<'a, 'i>,
    path: &str,
    spec: &[(&str, bool); N],
) -> Result<[Option<Node<'a, 'i>>; N], PersistenceError> {
    let mut found = [None; N];
    let mut next = 0;
    for c in parent.children().filter(|c| !is_ignorable(c)) {
        if !c.is_element() || c.tag_name().namespace().is_some() {
            return Err(PersistenceError::schema(child_path(path, &c), "unexpected content"));
        }
        let name = c.tag_name().name();
        let Some(pos) = spec.iter().position(|(n, _)| *n == name) else {
            return Err(PersistenceError::schema(format!("{path}/{name}"), "unknown element"));
        };
        if pos < next {
            return Err(PersistenceError::schema(
                format!("{path}/{name}"),
                "element duplicated or out of order",
            ));
        }
        if let Some((missing, _)) = spec[next..pos].iter().find(|(_, req)| *req) {
            return Err(PersistenceError::schema(format!("{path}/{missing}"), "missing element"));
        }
        found[pos] = Some(c);
        next = pos + 1;
    }
    if let Some((missing, _)) = spec[next..].iter().find(|(_, req)| *req) {
        return Err(PersistenceError::schema(format!("{path}/{missing}"), "missing element"));
    }
    Ok(found)
}
