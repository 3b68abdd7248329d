//! Shared space zoo for the integration suites.

use moebius::generators::*;
use moebius::AntipodalSpace;

pub fn zoo() -> Vec<(&'static str, AntipodalSpace)> {
    vec![
        ("discrete2", gen_discrete(2).unwrap()),
        ("discrete3", gen_discrete(3).unwrap()),
        ("discrete6", gen_discrete(6).unwrap()),
        ("circle4", gen_circle(4).unwrap()),
        ("circle8", gen_circle(8).unwrap()),
        ("circle16", gen_circle(16).unwrap()),
        ("dendro8", gen_dendrogram(&dendrogram_balanced8()).unwrap()),
        (
            "dendro5",
            gen_dendrogram(&dendrogram_caterpillar5()).unwrap(),
        ),
        ("quasi17", gen_quasimetric(8, 1.7, 2024).unwrap()),
    ]
}
