//! JSON and CSV serialization of potentials, boundary data, scattering
//! data and reconstructed fields. Complex samples are stored as
//! [re, im] pairs; round trips are bit-exact at double precision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::akns::{BoundaryData, LinePotential, BOUNDARY_SYMMETRY_TOL};
use crate::algebra::{CMat4, C64};
use crate::error::{Error, Result};

fn pair(v: C64) -> [f64; 2] {
    [v.re, v.im]
}

fn unpair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

fn field_to_pairs(f: &[C64]) -> Vec<[f64; 2]> {
    f.iter().map(|&v| pair(v)).collect()
}

fn pairs_to_field(p: &[[f64; 2]]) -> Vec<C64> {
    p.iter().map(|&v| unpair(v)).collect()
}

/// {grid: {L, N}, fields: {...}} document shared by potentials and
/// boundary data. L is the domain extent (half-width or final time) and
/// N the number of grid intervals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldsDoc {
    pub grid: GridDoc,
    pub fields: BTreeMap<String, Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridDoc {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

pub fn line_potential_to_doc(lp: &LinePotential) -> FieldsDoc {
    let mut fields = BTreeMap::new();
    fields.insert("q".to_string(), field_to_pairs(&lp.q));
    fields.insert("r".to_string(), field_to_pairs(&lp.r));
    FieldsDoc {
        grid: GridDoc { l: lp.l, n: lp.n() },
        fields,
    }
}

pub fn line_potential_from_doc(doc: &FieldsDoc, decay_threshold: f64) -> Result<LinePotential> {
    let q = doc
        .fields
        .get("q")
        .ok_or_else(|| Error::InvalidConfig("missing field 'q'".into()))?;
    let r = doc
        .fields
        .get("r")
        .ok_or_else(|| Error::InvalidConfig("missing field 'r'".into()))?;
    LinePotential::from_samples(doc.grid.l, pairs_to_field(q), pairs_to_field(r), decay_threshold)
}

pub fn boundary_to_doc(bd: &BoundaryData) -> FieldsDoc {
    let mut fields = BTreeMap::new();
    let names = ["g0", "g1", "h0", "h1"];
    let arrays = [&bd.g0, &bd.g1, &bd.h0, &bd.h1];
    for (name, arr) in names.iter().zip(arrays.iter()) {
        fields.insert(format!("{name}_1"), field_to_pairs(&arr[0]));
        fields.insert(format!("{name}_2"), field_to_pairs(&arr[1]));
    }
    FieldsDoc {
        grid: GridDoc { l: bd.t_final, n: bd.steps() },
        fields,
    }
}

pub fn boundary_from_doc(doc: &FieldsDoc) -> Result<BoundaryData> {
    let get = |name: &str| -> Result<Vec<C64>> {
        doc.fields
            .get(name)
            .map(|p| pairs_to_field(p))
            .ok_or_else(|| Error::InvalidConfig(format!("missing field '{name}'")))
    };
    let mut bd = BoundaryData {
        t_final: doc.grid.l,
        g0: [get("g0_1")?, get("g0_2")?],
        g1: [get("g1_1")?, get("g1_2")?],
        h0: [get("h0_1")?, get("h0_2")?],
        h1: [get("h1_1")?, get("h1_2")?],
        linearizable: false,
    };
    bd.linearizable = bd.symmetry_residual() < BOUNDARY_SYMMETRY_TOL;
    Ok(bd)
}

/// Scattering records: [{k: [re, im], S: 4x4 of [re, im]}, ...].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringRecord {
    pub k: [f64; 2],
    #[serde(rename = "S")]
    pub s: Vec<Vec<[f64; 2]>>,
}

pub fn scattering_records(ks: &[C64], mats: &[CMat4]) -> Vec<ScatteringRecord> {
    ks.iter()
        .zip(mats.iter())
        .map(|(&k, m)| ScatteringRecord {
            k: pair(k),
            s: (0..4)
                .map(|r| (0..4).map(|c| pair(m.at(r, c))).collect())
                .collect(),
        })
        .collect()
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    out.push('\n');
    out
}

/// CSV of boundary traces: t, re/im of q0, qx0, r0, rx0.
pub fn traces_csv(traces: &[crate::akns::BoundaryTrace]) -> String {
    let mut out = String::from("t,re_q0,im_q0,re_qx0,im_qx0,re_r0,im_r0,re_rx0,im_rx0\n");
    for tr in traces {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            tr.t, tr.q0.re, tr.q0.im, tr.qx0.re, tr.qx0.im, tr.r0.re, tr.r0.im, tr.rx0.re,
            tr.rx0.im
        ));
    }
    out
}
