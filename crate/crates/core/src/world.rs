//! Static world: items, skills, tasks, synonyms.

use crate::qty::{self, Qty};
use indexmap::IndexMap;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

pub const NEARBY_SUFFIX: &str = "_nearby";

/// Verbs a skill description may start with.
pub const VERBS: [&str; 6] = ["harvest", "craft", "find", "get", "place", "mine"];

pub fn is_nearby(name: &str) -> bool {
    name.ends_with(NEARBY_SUFFIX)
}

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("cannot read world file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("world parse error at line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("{context} references unknown item `{item}`")]
    DanglingItem { context: String, item: String },
    #[error("cyclic requirement graph: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("invalid world: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Item {
    pub name: String,
    pub nearby: bool,
}

impl Item {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        let nearby = is_nearby(&name);
        Item { name, nearby }
    }
}

/// An item with a quantity. Serialized as `["planks", 3]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Requirement {
    pub item: String,
    pub quantity: Qty,
}

impl Requirement {
    pub fn new(item: impl Into<String>, quantity: Qty) -> Self {
        Requirement {
            item: item.into(),
            quantity,
        }
    }

    pub fn nearby(&self) -> bool {
        is_nearby(&self.item)
    }
}

impl Serialize for Requirement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Q<'a>(&'a Qty);
        impl Serialize for Q<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                qty::serialize(self.0, s)
            }
        }
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.item)?;
        t.serialize_element(&Q(&self.quantity))?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Requirement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Q(Qty);
        impl<'de> Deserialize<'de> for Q {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                qty::deserialize(d).map(Q)
            }
        }
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Requirement;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an [item, quantity] pair")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Requirement, A::Error> {
                let item: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let q: Q = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(Requirement::new(item, q.0))
            }
        }
        d.deserialize_seq(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillKind {
    Find,
    Manipulate,
    Craft,
    Place,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Skill {
    pub description: String,
    pub kind: SkillKind,
    #[serde(default)]
    pub preconditions: Vec<Requirement>,
    #[serde(default)]
    pub consumes: Vec<Requirement>,
    pub produces: Vec<Requirement>,
    pub success_prob: f64,
    pub step_cost: u64,
    /// Per-biome override of `success_prob`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biome_success_prob: Option<BTreeMap<String, f64>>,
}

impl Skill {
    pub fn success_prob_in(&self, biome: &str) -> f64 {
        self.biome_success_prob
            .as_ref()
            .and_then(|m| m.get(biome).copied())
            .unwrap_or(self.success_prob)
    }

    /// The item a skill is "for": its first product.
    pub fn primary_product(&self) -> Option<&Requirement> {
        self.produces.first()
    }

    pub fn consumed(&self, item: &str) -> Qty {
        self.consumes
            .iter()
            .filter(|r| r.item == item)
            .map(|r| r.quantity)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub goal: Requirement,
    #[serde(default)]
    pub requirements: Vec<Requirement>,
    pub biome: String,
    pub max_steps: u64,
    #[serde(default)]
    pub initial_inventory: Vec<Requirement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    about: Option<String>,
    items: Vec<String>,
    skills: Vec<Skill>,
    tasks: Vec<TaskDef>,
    #[serde(default)]
    synonyms: IndexMap<String, String>,
}

/// Immutable once loaded; share freely across threads.
#[derive(Debug, Clone)]
pub struct World {
    pub about: Option<String>,
    pub items: Vec<Item>,
    pub skills: Vec<Skill>,
    pub tasks: Vec<TaskDef>,
    pub synonyms: IndexMap<String, String>,
    producers: HashMap<String, Vec<usize>>,
    skill_index: HashMap<String, usize>,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.about == other.about
            && self.items == other.items
            && self.skills == other.skills
            && self.tasks == other.tasks
            && self.synonyms == other.synonyms
    }
}

impl World {
    pub fn from_json_str(text: &str) -> Result<World, WorldError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let doc: WorldDoc = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            WorldError::Parse {
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        World::from_doc(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<World, WorldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        World::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let doc = WorldDoc {
            about: self.about.clone(),
            items: self.items.iter().map(|i| i.name.clone()).collect(),
            skills: self.skills.clone(),
            tasks: self.tasks.clone(),
            synonyms: self.synonyms.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("world serializes");
        s.push('\n');
        s
    }

    /// Builds and validates a world from parts.
    pub fn new(
        items: Vec<String>,
        skills: Vec<Skill>,
        tasks: Vec<TaskDef>,
        synonyms: IndexMap<String, String>,
    ) -> Result<World, WorldError> {
        World::from_doc(WorldDoc {
            about: None,
            items,
            skills,
            tasks,
            synonyms,
        })
    }

    fn from_doc(doc: WorldDoc) -> Result<World, WorldError> {
        let mut producers: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, s) in doc.skills.iter().enumerate() {
            for p in &s.produces {
                producers.entry(p.item.clone()).or_default().push(i);
            }
        }
        let skill_index = doc
            .skills
            .iter()
            .enumerate()
            .map(|(i, s)| (s.description.clone(), i))
            .collect();
        let world = World {
            about: doc.about,
            items: doc.items.into_iter().map(Item::new).collect(),
            skills: doc.skills,
            tasks: doc.tasks,
            synonyms: doc.synonyms,
            producers,
            skill_index,
        };
        world.validate()?;
        Ok(world)
    }

    fn validate(&self) -> Result<(), WorldError> {
        let mut names = HashSet::new();
        for it in &self.items {
            if it.name.is_empty() {
                return Err(WorldError::Invalid("empty item name".into()));
            }
            if !names.insert(it.name.as_str()) {
                return Err(WorldError::Invalid(format!("duplicate item `{}`", it.name)));
            }
        }
        let check_req = |ctx: &str, r: &Requirement| -> Result<(), WorldError> {
            if !names.contains(r.item.as_str()) {
                return Err(WorldError::DanglingItem {
                    context: ctx.to_string(),
                    item: r.item.clone(),
                });
            }
            if !qty::is_positive(&r.quantity) {
                return Err(WorldError::Invalid(format!(
                    "{ctx}: quantity of `{}` must be positive",
                    r.item
                )));
            }
            Ok(())
        };

        let mut descs = HashSet::new();
        for s in &self.skills {
            let ctx = format!("skill `{}`", s.description);
            if !descs.insert(s.description.as_str()) {
                return Err(WorldError::Invalid(format!("duplicate {ctx}")));
            }
            let verb = s.description.split_whitespace().next().unwrap_or("");
            if !VERBS.contains(&verb) {
                return Err(WorldError::Invalid(format!(
                    "{ctx}: description must start with one of {}",
                    VERBS.join(", ")
                )));
            }
            for r in s.preconditions.iter().chain(&s.consumes).chain(&s.produces) {
                check_req(&ctx, r)?;
            }
            if s.produces.is_empty() {
                return Err(WorldError::Invalid(format!("{ctx} produces nothing")));
            }
            for c in &s.consumes {
                let pre: Qty = s
                    .preconditions
                    .iter()
                    .filter(|p| p.item == c.item)
                    .map(|p| p.quantity)
                    .sum();
                if pre < c.quantity {
                    return Err(WorldError::Invalid(format!(
                        "{ctx} consumes {} {} but its preconditions list {}",
                        qty::fmt_bare(&c.quantity),
                        c.item,
                        qty::fmt_bare(&pre)
                    )));
                }
            }
            let probs = std::iter::once(s.success_prob)
                .chain(s.biome_success_prob.iter().flat_map(|m| m.values().copied()));
            for p in probs {
                if !(0.0..=1.0).contains(&p) {
                    return Err(WorldError::Invalid(format!(
                        "{ctx}: success probability {p} outside [0, 1]"
                    )));
                }
            }
            if s.kind == SkillKind::Craft && s.success_prob != 1.0 {
                return Err(WorldError::Invalid(format!(
                    "{ctx}: craft skills always succeed (success_prob must be 1.0)"
                )));
            }
            if s.step_cost == 0 {
                return Err(WorldError::Invalid(format!("{ctx}: step_cost must be positive")));
            }
        }

        let mut tnames = HashSet::new();
        for t in &self.tasks {
            let ctx = format!("task `{}`", t.name);
            if !tnames.insert(t.name.as_str()) {
                return Err(WorldError::Invalid(format!("duplicate {ctx}")));
            }
            check_req(&ctx, &t.goal)?;
            for r in t.requirements.iter().chain(&t.initial_inventory) {
                check_req(&ctx, r)?;
            }
            if t.max_steps == 0 {
                return Err(WorldError::Invalid(format!("{ctx}: max_steps must be positive")));
            }
            if !self.producers.contains_key(&t.goal.item) {
                return Err(WorldError::Invalid(format!(
                    "{ctx}: goal item `{}` is not produced by any skill",
                    t.goal.item
                )));
            }
        }

        for t in &self.tasks {
            self.check_closure(t)?;
        }
        Ok(())
    }

    /// Walks the requirement closure of a task: rejects cycles and items that
    /// can be neither produced nor found in the initial inventory.
    fn check_closure(&self, task: &TaskDef) -> Result<(), WorldError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let initial: HashSet<&str> = task.initial_inventory.iter().map(|r| r.item.as_str()).collect();
        let mut marks: HashMap<&str, Mark> = HashMap::new();
        let mut path: Vec<&str> = Vec::new();

        fn visit<'a>(
            w: &'a World,
            item: &'a str,
            task: &TaskDef,
            initial: &HashSet<&str>,
            marks: &mut HashMap<&'a str, Mark>,
            path: &mut Vec<&'a str>,
        ) -> Result<(), WorldError> {
            match marks.get(item) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Open) => {
                    let start = path.iter().position(|p| *p == item).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(item.to_string());
                    return Err(WorldError::Cycle(cycle));
                }
                None => {}
            }
            marks.insert(item, Mark::Open);
            path.push(item);
            let prods = w.producers_of(item);
            if prods.is_empty() && !initial.contains(item) {
                return Err(WorldError::Invalid(format!(
                    "task `{}`: item `{item}` is neither producible nor in the initial inventory",
                    task.name
                )));
            }
            for &si in prods {
                for p in &w.skills[si].preconditions {
                    visit(w, p.item.as_str(), task, initial, marks, path)?;
                }
            }
            path.pop();
            marks.insert(item, Mark::Done);
            Ok(())
        }

        visit(self, &task.goal.item, task, &initial, &mut marks, &mut path)?;
        for r in &task.requirements {
            visit(self, &r.item, task, &initial, &mut marks, &mut path)?;
        }
        Ok(())
    }

    pub fn producers_of(&self, item: &str) -> &[usize] {
        self.producers.get(item).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Fewest preconditions wins; ties go to the lexicographically smallest description.
    pub fn cheapest_producer(&self, item: &str) -> Option<&Skill> {
        self.producers_of(item)
            .iter()
            .map(|&i| &self.skills[i])
            .min_by(|a, b| {
                a.preconditions
                    .len()
                    .cmp(&b.preconditions.len())
                    .then_with(|| a.description.cmp(&b.description))
            })
    }

    pub fn skill(&self, description: &str) -> Option<&Skill> {
        self.skill_index.get(description).map(|&i| &self.skills[i])
    }

    pub fn skill_id(&self, description: &str) -> Option<usize> {
        self.skill_index.get(description).copied()
    }

    pub fn task(&self, name: &str) -> Option<&TaskDef> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn task_index(&self, name: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.name == name)
    }

    pub fn tasks_in_family(&self, family: &str) -> Vec<&TaskDef> {
        self.tasks
            .iter()
            .filter(|t| t.family.as_deref() == Some(family))
            .collect()
    }

    /// Same world with every success probability forced to 1.0.
    pub fn deterministic(&self) -> World {
        let mut w = self.clone();
        for s in &mut w.skills {
            s.success_prob = 1.0;
            if let Some(m) = &mut s.biome_success_prob {
                for v in m.values_mut() {
                    *v = 1.0;
                }
            }
        }
        w
    }

    /// Task for producing an item, named after the producing skill.
    pub fn derived_task(&self, parent: &TaskDef, goal: &Requirement) -> TaskDef {
        let (name, requirements) = match self.cheapest_producer(&goal.item) {
            Some(s) => (s.description.replace(' ', "_"), s.preconditions.clone()),
            None => (format!("get_{}", goal.item), Vec::new()),
        };
        TaskDef {
            name,
            family: parent.family.clone(),
            goal: goal.clone(),
            requirements,
            biome: parent.biome.clone(),
            max_steps: parent.max_steps,
            initial_inventory: Vec::new(),
        }
    }
}

/// One derived task per requirement of `task`, in requirement order.
pub fn subtasks_of(world: &World, task: &TaskDef) -> Vec<TaskDef> {
    task.requirements
        .iter()
        .map(|r| world.derived_task(task, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qty::qty;

    fn doc(skills: &str) -> String {
        format!(
            r#"{{"items": ["log", "planks", "stick"],
                "skills": {skills},
                "tasks": [{{"name": "craft_stick", "goal": ["stick", 1], "requirements": [["planks", 2]],
                           "biome": "plains", "max_steps": 100}}]}}"#
        )
    }

    #[test]
    fn consume_exceeding_precondition_is_rejected() {
        let text = doc(
            r#"[{"description": "harvest log", "kind": "manipulate", "produces": [["log", 1]], "success_prob": 1.0, "step_cost": 1},
                {"description": "craft planks", "kind": "craft", "preconditions": [["log", 1]], "consumes": [["log", 1]], "produces": [["planks", 4]], "success_prob": 1.0, "step_cost": 1},
                {"description": "craft stick", "kind": "craft", "preconditions": [["planks", 1]], "consumes": [["planks", 2]], "produces": [["stick", 1]], "success_prob": 1.0, "step_cost": 1}]"#,
        );
        let err = World::from_json_str(&text).unwrap_err();
        assert!(matches!(err, WorldError::Invalid(ref m) if m.contains("consumes 2 planks")), "{err}");
    }

    #[test]
    fn cycle_is_named() {
        let text = doc(
            r#"[{"description": "craft planks", "kind": "craft", "preconditions": [["stick", 1]], "produces": [["planks", 4]], "success_prob": 1.0, "step_cost": 1},
                {"description": "craft stick", "kind": "craft", "preconditions": [["planks", 2]], "produces": [["stick", 1]], "success_prob": 1.0, "step_cost": 1}]"#,
        );
        match World::from_json_str(&text).unwrap_err() {
            WorldError::Cycle(c) => {
                assert_eq!(c.first(), c.last());
                assert!(c.contains(&"planks".to_string()) && c.contains(&"stick".to_string()));
            }
            e => panic!("expected cycle, got {e}"),
        }
    }

    #[test]
    fn dangling_item() {
        let text = doc(
            r#"[{"description": "craft stick", "kind": "craft", "preconditions": [["plank", 2]], "produces": [["stick", 1]], "success_prob": 1.0, "step_cost": 1}]"#,
        );
        assert!(matches!(
            World::from_json_str(&text).unwrap_err(),
            WorldError::DanglingItem { ref item, .. } if item == "plank"
        ));
    }

    #[test]
    fn parse_error_has_location() {
        let text = r#"{"items": ["log"], "skills": [{"description": "harvest log", "kind": "chop"}], "tasks": []}"#;
        match World::from_json_str(text).unwrap_err() {
            WorldError::Parse { line, field, .. } => {
                assert_eq!(line, 1);
                assert!(field.starts_with("skills[0]"), "{field}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_verb_and_craft_probability() {
        let text = doc(
            r#"[{"description": "chop log", "kind": "manipulate", "produces": [["log", 1]], "success_prob": 1.0, "step_cost": 1}]"#,
        );
        assert!(World::from_json_str(&text).is_err());
        let text = doc(
            r#"[{"description": "craft stick", "kind": "craft", "produces": [["stick", 1]], "success_prob": 0.5, "step_cost": 1}]"#,
        );
        assert!(World::from_json_str(&text).is_err());
    }

    #[test]
    fn cheapest_producer_tie_break() {
        let text = r#"{"items": ["log", "log_nearby"],
            "skills": [
              {"description": "mine log", "kind": "manipulate", "preconditions": [["log_nearby", 1]], "produces": [["log", 1]], "success_prob": 1.0, "step_cost": 1},
              {"description": "harvest log", "kind": "manipulate", "preconditions": [["log_nearby", 1]], "produces": [["log", 1]], "success_prob": 1.0, "step_cost": 1},
              {"description": "find log nearby", "kind": "find", "produces": [["log_nearby", 1]], "success_prob": 1.0, "step_cost": 1}],
            "tasks": []}"#;
        let w = World::from_json_str(text).unwrap();
        assert_eq!(w.cheapest_producer("log").unwrap().description, "harvest log");
        let parent = TaskDef {
            name: "t".into(),
            family: None,
            goal: Requirement::new("log", qty(2)),
            requirements: vec![Requirement::new("log", qty(2))],
            biome: "forest".into(),
            max_steps: 9,
            initial_inventory: vec![],
        };
        let subs = subtasks_of(&w, &parent);
        assert_eq!(subs[0].name, "harvest_log");
        assert_eq!(subs[0].requirements, vec![Requirement::new("log_nearby", qty(1))]);
        assert_eq!(subs[0].max_steps, 9);
    }
}
