//! Prompt templates and the requirement-gap computation behind the CoT prompt.

use crate::qty::{self, Qty};
use crate::sim::Feedback;
use crate::world::{is_nearby, Requirement, NEARBY_SUFFIX};
use indexmap::IndexMap;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

pub const DECISION_TEMPLATE: &str = "\
Your goal is to complete a task in Minecraft.
Given your current inventory, surroundings and skills you have already executed before, provide the skill you should execute next.
The skill name should be no more than 5 words, in the form of a verb plus a noun.
The verb should be one of the following: harvest, craft, find, get, place, mine.
Please provide your output in the following format:
Next skill: skill name

Now the information:
Task: {{task}}
Inventory: {{inventory}}
Surroundings: {{surrounding}}
Last three skills you have just already executed: {{past skills}}
Recipe: The requirements to {{task}} in Minecraft is: {{requirement}}
Your output:";

pub const REVISION_TEMPLATE: &str = "\
Your output: {{draft skill}}
OK, according to your output, your next skill is: {{retrieved skill}}
But the skill failed.
Please find out the reason why the skill failed, and make a revision.
Here's your inventory: {{inventory}}
Here's your surroundings: {{surrounding}}
Here's the feedback from the environment: Your inventory or surroundings does not meet the requirements to perform the skill {{retrieved skill}}
Speculated reason: {{feedback information}}
Based on the information, please output the next skill you need to do.
Revised skill:";

pub const COT_TEMPLATE: &str = "\
Given requirements to achieve a task in Minecraft, answer which requirements are not met yet according to the inventory and surroundings.
Think step by step and object by object. Note that objects ending with '_nearby' are required to be in the surroundings while other objects are required to be in the inventory. Here's an example:

Task: craft furnace
The requirements to craft furnace in Minecraft is: 8.0 cobblestone; 1.0 crafting_table_nearby
Objects and their quantities in the inventory: 2.0 log; 3.0 dirt; 4.0 cobblestone
Objects and their quantities in the surroundings: 1.0 cobblestone_nearby
Which requirements are not met yet?
Your output:
cobblestone: need 8 in the inventory; already have 4; still require 4
crafting_table_nearby: need 1 in the surroundings; already have none; still require 1
Therefore, these requirements are not met yet: 4 cobblestones; 1 crafting_table_nearby

Here's another example:

Task: craft furnace
The requirements to craft furnace in Minecraft is: 8.0 cobblestone; 1.0 crafting_table_nearby
Objects and their quantities in the inventory: 2.0 log; 3.0 dirt; 11.0 cobblestone
Objects and their quantities in the surroundings: 1.0 crafting_table_nearby
Which requirements are not met yet?
Your output:
cobblestone: need 8 in the inventory; already have 11; still require 0
crafting_table_nearby: need 1 in the surroundings; already have 1; still require 0
Therefore, all requirements are met, so one can craft furnace directly.

Now is your turn:

Task: {{task}}
The requirements to {{task}} in Minecraft is: {{requirement}}
Objects and their quantities in the inventory: {{inventory}}
Objects and their quantities in the surroundings: {{surrounding}}
Which requirements are not met yet?
Your output:
...
Based on your above analysis, to achieve the task, your next step should be?
...
Then please provide a skill name according to the next step.
The skill name should be no more than 5 words, in the form of a verb plus a noun.
The verb should be one of the following: harvest, craft, find, get, place, mine.
Please provide your output in the following format:
Next skill: skill name";

pub const DATASET_INPUT_TEMPLATE: &str = "\
Your goal is to complete a task in Minecraft.
Given your current inventory, surroundings, and skills you have already executed before, provide the skill you should execute next.
Now the information:

Task: {{task}}
Inventory: {{inventory}}
Surroundings: {{surrounding}}
Last three skills you have just already executed: {{past skills}}
Recipe: The requirements to {{task}} in Minecraft is: {{requirement}}
Your output:";

pub const DATASET_OUTPUT_TEMPLATE: &str = "Next skill: {{skill name}}";

const OUTPUT_SUFFIX: &str = "Your output:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Decision,
    Revision,
    Cot,
    DatasetInput,
    DatasetOutput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub text: String,
    /// Substituted values; a revision also carries its prior prompt under `prior`.
    pub slots: IndexMap<String, String>,
}

impl PromptBundle {
    fn build(kind: PromptKind, slots: IndexMap<String, String>) -> Self {
        let text = render_kind(kind, &slots);
        PromptBundle { kind, text, slots }
    }

    /// Renders again from the stored slots.
    pub fn rerender(&self) -> String {
        render_kind(self.kind, &self.slots)
    }
}

fn render_kind(kind: PromptKind, slots: &IndexMap<String, String>) -> String {
    match kind {
        PromptKind::Decision => fill(DECISION_TEMPLATE, slots),
        PromptKind::Cot => fill(COT_TEMPLATE, slots),
        PromptKind::DatasetInput => fill(DATASET_INPUT_TEMPLATE, slots),
        PromptKind::DatasetOutput => fill(DATASET_OUTPUT_TEMPLATE, slots),
        PromptKind::Revision => {
            let prior = slots.get("prior").map(String::as_str).unwrap_or("");
            let block = fill(REVISION_TEMPLATE, slots);
            match prior.strip_suffix(OUTPUT_SUFFIX) {
                Some(head) => format!("{head}{block}"),
                None if prior.is_empty() => block,
                None => format!("{prior}\n{block}"),
            }
        }
    }
}

/// Single pass: substituted values are never rescanned for markers.
/// Unknown markers are left in place.
pub fn fill(template: &str, slots: &IndexMap<String, String>) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match slots.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn slots<const N: usize>(pairs: [(&str, &str); N]) -> IndexMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// "8.0 cobblestone; 1.0 crafting_table_nearby", or "nothing".
pub fn render_requirements(reqs: &[Requirement]) -> String {
    if reqs.is_empty() {
        return "nothing".to_string();
    }
    reqs.iter()
        .map(|r| format!("{} {}", qty::fmt1(&r.quantity), r.item))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Inverse of the collection rendering: "2.0 log; 3.0 dirt" or "nothing".
pub fn parse_collection(text: &str) -> Result<Vec<Requirement>, String> {
    let text = text.trim();
    if text.is_empty() || text == "nothing" {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|part| {
            let part = part.trim();
            let (q, item) = part
                .split_once(char::is_whitespace)
                .ok_or_else(|| format!("expected `<quantity> <item>`, got `{part}`"))?;
            let quantity = qty::parse_qty(q).ok_or_else(|| format!("bad quantity `{q}`"))?;
            Ok(Requirement::new(item.trim(), quantity))
        })
        .collect()
}

/// Parses a collection text into item totals (repeated items add up).
pub fn collection_map(text: &str) -> Result<IndexMap<String, Qty>, String> {
    let mut m = IndexMap::new();
    for r in parse_collection(text)? {
        *m.entry(r.item).or_insert_with(Qty::zero) += r.quantity;
    }
    Ok(m)
}

/// Last three entries joined by "; ", or "none".
pub fn render_history(history: &[String]) -> String {
    let tail = &history[history.len().saturating_sub(3)..];
    if tail.is_empty() {
        "none".to_string()
    } else {
        tail.join("; ")
    }
}

pub fn render_decision(
    task: &str,
    inventory_text: &str,
    surroundings_text: &str,
    history: &[String],
    requirements_text: &str,
) -> PromptBundle {
    let past = render_history(history);
    PromptBundle::build(
        PromptKind::Decision,
        slots([
            ("task", task),
            ("inventory", inventory_text),
            ("surrounding", surroundings_text),
            ("past skills", &past),
            ("requirement", requirements_text),
        ]),
    )
}

/// Reason sentences for each unmet precondition, joined by a space.
pub fn speculated_reason(feedback: &Feedback) -> String {
    let skill = &feedback.attempted_skill;
    feedback
        .deficits
        .iter()
        .map(|d| {
            let item = &d.requirement.item;
            if is_nearby(item) {
                let base = item.strip_suffix(NEARBY_SUFFIX).unwrap_or(item);
                format!(
                    "{skill} requires {base} nearby but it is not in your surroundings. You should get {base} nearby first."
                )
            } else {
                let need = qty::fmt_bare(&(d.missing + d.have));
                format!(
                    "{skill} need to consume {need} {item} but not enough now. You should get enough {item} to {skill}."
                )
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Appends the revision block. `feedback` must list at least one deficit.
pub fn render_revision(
    prior: &PromptBundle,
    draft_text: &str,
    retrieved_skill: &str,
    inventory_text: &str,
    surroundings_text: &str,
    feedback: &Feedback,
) -> PromptBundle {
    assert!(!feedback.deficits.is_empty(), "revision rendered without deficits");
    render_revision_with_reason(
        prior,
        draft_text,
        retrieved_skill,
        inventory_text,
        surroundings_text,
        &speculated_reason(feedback),
    )
}

pub fn render_revision_with_reason(
    prior: &PromptBundle,
    draft_text: &str,
    retrieved_skill: &str,
    inventory_text: &str,
    surroundings_text: &str,
    reason: &str,
) -> PromptBundle {
    PromptBundle::build(
        PromptKind::Revision,
        slots([
            ("prior", &prior.text),
            ("draft skill", draft_text),
            ("retrieved skill", retrieved_skill),
            ("inventory", inventory_text),
            ("surrounding", surroundings_text),
            ("feedback information", reason),
        ]),
    )
}

pub fn render_cot(task: &str, requirements_text: &str, inventory_text: &str, surroundings_text: &str) -> PromptBundle {
    PromptBundle::build(
        PromptKind::Cot,
        slots([
            ("task", task),
            ("requirement", requirements_text),
            ("inventory", inventory_text),
            ("surrounding", surroundings_text),
        ]),
    )
}

/// (input_text, output_text) of one supervised instance.
pub fn render_dataset_pair(
    task_label: &str,
    inventory_text: &str,
    surroundings_text: &str,
    history: &[String],
    requirements_text: &str,
    skill_name: &str,
) -> (String, String) {
    let past = render_history(history);
    let input = fill(
        DATASET_INPUT_TEMPLATE,
        &slots([
            ("task", task_label),
            ("inventory", inventory_text),
            ("surrounding", surroundings_text),
            ("past skills", &past),
            ("requirement", requirements_text),
        ]),
    );
    let output = fill(DATASET_OUTPUT_TEMPLATE, &slots([("skill name", skill_name)]));
    (input, output)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapLine {
    pub item: String,
    #[serde(with = "crate::qty")]
    pub need: Qty,
    #[serde(with = "crate::qty")]
    pub have: Qty,
    #[serde(with = "crate::qty")]
    pub still_require: Qty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub lines: Vec<GapLine>,
    pub all_met: bool,
}

pub fn compute_gaps(
    requirements: &[Requirement],
    inventory: &IndexMap<String, Qty>,
    surroundings: &IndexMap<String, Qty>,
) -> GapReport {
    let lines: Vec<GapLine> = requirements
        .iter()
        .map(|r| {
            let c = if r.nearby() { surroundings } else { inventory };
            let have = c.get(&r.item).copied().unwrap_or_else(Qty::zero);
            let still = if have >= r.quantity { Qty::zero() } else { r.quantity - have };
            GapLine {
                item: r.item.clone(),
                need: r.quantity,
                have,
                still_require: still,
            }
        })
        .collect();
    let all_met = lines.iter().all(|l| l.still_require.is_zero());
    GapReport { lines, all_met }
}

impl GapReport {
    /// Per-requirement lines plus the concluding sentence.
    pub fn analysis(&self, task: &str) -> String {
        let mut out: Vec<String> = self
            .lines
            .iter()
            .map(|l| {
                let place = if is_nearby(&l.item) { "surroundings" } else { "inventory" };
                let have = if l.have.is_zero() {
                    "none".to_string()
                } else {
                    qty::fmt_bare(&l.have)
                };
                format!(
                    "{}: need {} in the {place}; already have {have}; still require {}",
                    l.item,
                    qty::fmt_bare(&l.need),
                    qty::fmt_bare(&l.still_require)
                )
            })
            .collect();
        if self.all_met {
            out.push(format!("Therefore, all requirements are met, so one can {task} directly."));
        } else {
            let unmet: Vec<String> = self
                .lines
                .iter()
                .filter(|l| !l.still_require.is_zero())
                .map(|l| {
                    let plural = if l.still_require != Qty::one() && !is_nearby(&l.item) && !l.item.ends_with('s') {
                        "s"
                    } else {
                        ""
                    };
                    format!("{} {}{plural}", qty::fmt_bare(&l.still_require), l.item)
                })
                .collect();
            out.push(format!("Therefore, these requirements are not met yet: {}", unmet.join("; ")));
        }
        out.join("\n")
    }

    /// The question block followed by the analysis, as in the CoT examples.
    pub fn verbalize(&self, task: &str, requirements_text: &str, inventory_text: &str, surroundings_text: &str) -> String {
        format!(
            "Task: {task}\n\
             The requirements to {task} in Minecraft is: {requirements_text}\n\
             Objects and their quantities in the inventory: {inventory_text}\n\
             Objects and their quantities in the surroundings: {surroundings_text}\n\
             Which requirements are not met yet?\n\
             Your output:\n{}",
            self.analysis(task)
        )
    }
}
