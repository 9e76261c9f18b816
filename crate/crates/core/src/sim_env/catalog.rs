use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    /// Upright cylinder.
    Disk,
    /// Square-footprint box with a yaw.
    Box,
    Cone,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Disk, ShapeKind::Box, ShapeKind::Cone];

    /// Synonymous nouns; the first is used in the type id.
    pub fn nouns(self) -> [&'static str; 3] {
        match self {
            ShapeKind::Disk => ["barrel", "drum", "cylinder"],
            ShapeKind::Box => ["box", "crate", "cube"],
            ShapeKind::Cone => ["cone", "pylon", "tower"],
        }
    }
}

pub const COLORS: [(&str, [f64; 3]); 8] = [
    ("red", [0.85, 0.14, 0.12]),
    ("blue", [0.14, 0.30, 0.86]),
    ("green", [0.16, 0.66, 0.20]),
    ("yellow", [0.93, 0.84, 0.14]),
    ("purple", [0.52, 0.18, 0.68]),
    ("orange", [0.96, 0.52, 0.08]),
    ("white", [0.95, 0.95, 0.93]),
    ("black", [0.07, 0.07, 0.08]),
];

/// A procedural object type: a colored shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectType {
    pub id: String,
    pub color_name: String,
    pub rgb: [f64; 3],
    pub shape: ShapeKind,
}

impl ObjectType {
    pub fn new(color: usize, shape: ShapeKind) -> Self {
        let (name, rgb) = COLORS[color];
        ObjectType {
            id: format!("{name}_{}", shape.nouns()[0]),
            color_name: name.to_string(),
            rgb,
            shape,
        }
    }

    pub fn nouns(&self) -> [&'static str; 3] {
        self.shape.nouns()
    }

    /// Five exemplar phrases, tokenized.
    pub fn phrases(&self) -> Vec<Vec<String>> {
        let c = self.color_name.as_str();
        let [n0, n1, n2] = self.nouns();
        [
            vec!["the", c, n0],
            vec![c, n0],
            vec!["the", c, n1],
            vec!["the", c, n2],
            vec!["a", c, n0],
        ]
        .into_iter()
        .map(|p| p.into_iter().map(String::from).collect())
        .collect()
    }
}

/// All 24 color/shape combinations, color-major.
pub fn catalog() -> Vec<ObjectType> {
    (0..COLORS.len())
        .flat_map(|c| ShapeKind::ALL.into_iter().map(move |s| ObjectType::new(c, s)))
        .collect()
}

/// Eight held-out types, one per color, none used for training.
pub fn held_out_pool() -> Vec<ObjectType> {
    (0..COLORS.len())
        .map(|c| ObjectType::new(c, ShapeKind::ALL[c % 3]))
        .collect()
}

/// The 16 types not in [`held_out_pool`].
pub fn training_pool() -> Vec<ObjectType> {
    let held: Vec<String> = held_out_pool().into_iter().map(|t| t.id).collect();
    catalog().into_iter().filter(|t| !held.contains(&t.id)).collect()
}
