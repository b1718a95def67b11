use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{QuestionId, QuestionnaireError, CODES};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub text: String,
    /// `None` for options that carry no valence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<i8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
    #[serde(default, rename = "option")]
    pub options: Vec<AnswerOption>,
    #[serde(default)]
    pub in_analysis: bool,
}

impl Question {
    pub fn code_for(&self, answer: &str) -> Option<i8> {
        let answer = answer.trim();
        self.options
            .iter()
            .find(|o| o.text.trim().eq_ignore_ascii_case(answer))
            .and_then(|o| o.code)
    }

    pub fn text_for(&self, code: i8) -> Option<&str> {
        self.options
            .iter()
            .find(|o| o.code == Some(code))
            .map(|o| o.text.as_str())
    }

    pub fn codes(&self) -> impl Iterator<Item = i8> + '_ {
        self.options.iter().filter_map(|o| o.code)
    }

    pub fn is_coded(&self) -> bool {
        self.codes().next().is_some()
    }

    fn validate(&self) -> Result<(), QuestionnaireError> {
        let bad = |reason: &str| QuestionnaireError::InvalidOptions {
            question: self.id.clone(),
            reason: reason.to_string(),
        };
        let mut codes = HashSet::new();
        let mut texts = HashSet::new();
        for opt in &self.options {
            if !texts.insert(opt.text.trim().to_lowercase()) {
                return Err(bad(&format!("option `{}` listed twice", opt.text)));
            }
            if let Some(code) = opt.code {
                if !CODES.contains(&code) {
                    return Err(bad(&format!("code {code} outside -2..=2")));
                }
                if !codes.insert(code) {
                    return Err(bad(&format!("code {code} used twice")));
                }
            }
        }
        if self.in_analysis && codes.len() < 2 {
            return Err(bad("questions used in analysis need at least two coded options"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionBank {
    #[serde(rename = "question")]
    pub questions: Vec<Question>,
}

impl QuestionBank {
    pub fn new(questions: Vec<Question>) -> Result<Self, QuestionnaireError> {
        let bank = Self { questions };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<(), QuestionnaireError> {
        let mut ids = HashSet::new();
        for q in &self.questions {
            if !ids.insert(&q.id) {
                return Err(QuestionnaireError::DuplicateQuestion(q.id.clone()));
            }
            q.validate()?;
        }
        Ok(())
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id.as_str() == id)
    }

    /// Questions that contribute to scores, in bank order.
    pub fn analysed(&self) -> impl Iterator<Item = &Question> {
        self.questions.iter().filter(|q| q.in_analysis)
    }

    pub fn analysed_ids(&self) -> Vec<QuestionId> {
        self.analysed().map(|q| q.id.clone()).collect()
    }

    pub fn from_toml(text: &str) -> Result<Self, QuestionnaireError> {
        let bank: Self =
            toml::from_str(text).map_err(|e| QuestionnaireError::BankFormat(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("question bank serializes")
    }

    /// The eleven-question UK / Ireland instrument. Q1-Q5, Q9 and Q10 are
    /// coded and used in analysis; the rest are free text.
    pub fn uk_ireland() -> Self {
        fn coded(id: &str, text: &str, options: &[(i8, &str)]) -> Question {
            Question {
                id: QuestionId::new(id),
                text: text.into(),
                options: options
                    .iter()
                    .map(|&(code, t)| AnswerOption {
                        text: t.into(),
                        code: Some(code),
                    })
                    .collect(),
                in_analysis: true,
            }
        }
        fn open(id: &str, text: &str) -> Question {
            Question {
                id: QuestionId::new(id),
                text: text.into(),
                options: Vec::new(),
                in_analysis: false,
            }
        }
        let yes_no = [(-2, "Yes"), (2, "No")];
        Self {
            questions: vec![
                coded(
                    "Q1",
                    "If a member of the Royal family visited your hometown, how likely would you be to go see them?",
                    &[(-2, "Very likely"), (-1, "Likely"), (0, "Neutral"), (1, "Less likely"), (2, "Not likely")],
                ),
                coded(
                    "Q2",
                    "If the UK were to go to war, would you be happy for Irish troops to join them?",
                    &yes_no,
                ),
                coded(
                    "Q3",
                    "What was your reaction to the news of Prince Charles contracting Covid-19?",
                    &[(-2, "Sympathetic"), (0, "Not care"), (2, "Unsympathetic")],
                ),
                coded("Q4", "Did you watch any of the Royal Weddings live on TV?", &yes_no),
                coded(
                    "Q5",
                    "Are you able to name all of Will and Kate's children?",
                    &[(-2, "Yes"), (0, "Not all"), (2, "No")],
                ),
                open("Q6", "Do you know if Prince Philip is alive or dead?"),
                open("Q7", "Who is your favourite member of the Royal family?"),
                open("Q8", "Where is your favourite football team located?"),
                coded(
                    "Q9",
                    "Would you be happy for some of Ireland's emergency Personal Protective Equipment (PPE) to be shared with the UK during the Covid-19 outbreak?",
                    &yes_no,
                ),
                coded(
                    "Q10",
                    "How did you feel when the UK left the EU in January 2020?",
                    &[(-2, "Very happy"), (-1, "Happy"), (0, "Didn't care"), (1, "Unhappy"), (2, "Very unhappy")],
                ),
                open(
                    "Q11",
                    "During the financial crisis in Ireland in 2008, the UK provided substantial financial assistance to Ireland. If the UK experienced similar financial difficulty should Ireland do likewise?",
                ),
            ],
        }
    }
}
