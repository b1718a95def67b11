use std::io::{Read, Write};

use super::{CodedResponse, QuestionBank, QuestionId, QuestionnaireError};
use crate::RespondentCode;

const RESPONDENT_COLUMN: &str = "respondent";

/// Reads a cohort table: a `respondent` column plus one column per analysed
/// question. Cells hold either the numeric code or the option text.
pub fn read_cohort_csv<R: Read>(
    bank: &QuestionBank,
    reader: R,
) -> Result<Vec<CodedResponse>, QuestionnaireError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let csv_err = |e: csv::Error| QuestionnaireError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);

    let respondent_col = column(RESPONDENT_COLUMN).ok_or_else(|| QuestionnaireError::Csv {
        line: 1,
        message: format!("missing `{RESPONDENT_COLUMN}` column"),
    })?;
    let mut question_cols = Vec::new();
    for q in bank.analysed() {
        let col = column(q.id.as_str()).ok_or_else(|| QuestionnaireError::MissingColumn(q.id.clone()))?;
        question_cols.push((q, col));
    }

    let mut cohort = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let at_line = |e: QuestionnaireError| QuestionnaireError::Csv {
            line,
            message: e.to_string(),
        };
        let respondent: RespondentCode = row
            .get(respondent_col)
            .unwrap_or_default()
            .parse()
            .map_err(|e: crate::InvalidRespondentCode| QuestionnaireError::Csv {
                line,
                message: e.to_string(),
            })?;
        let mut answers = std::collections::BTreeMap::new();
        for &(q, col) in &question_cols {
            let cell = row.get(col).unwrap_or_default();
            if cell.is_empty() {
                return Err(at_line(QuestionnaireError::MissingAnswer {
                    question: q.id.clone(),
                }));
            }
            let code = match cell.parse::<i8>() {
                Ok(code) if q.text_for(code).is_some() => code,
                Ok(code) => {
                    return Err(at_line(QuestionnaireError::IllegalCode {
                        question: q.id.clone(),
                        code,
                    }))
                }
                Err(_) => q.code_for(cell).ok_or_else(|| {
                    at_line(QuestionnaireError::UnknownOption {
                        question: q.id.clone(),
                        answer: cell.to_string(),
                    })
                })?,
            };
            answers.insert(q.id.clone(), code);
        }
        cohort.push(CodedResponse {
            respondent,
            answers,
        });
    }
    Ok(cohort)
}

/// Writes coded answers, one row per respondent, columns in bank order.
pub fn write_cohort_csv<W: Write>(
    bank: &QuestionBank,
    cohort: &[CodedResponse],
    writer: W,
) -> Result<(), QuestionnaireError> {
    let ids: Vec<QuestionId> = bank.analysed_ids();
    let io = |e: csv::Error| QuestionnaireError::Csv {
        line: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![RESPONDENT_COLUMN.to_string()];
    header.extend(ids.iter().map(|id| id.0.clone()));
    w.write_record(&header).map_err(io)?;
    for response in cohort {
        let mut row = vec![response.respondent.to_string()];
        for id in &ids {
            let code = response
                .answers
                .get(id)
                .ok_or_else(|| QuestionnaireError::MissingAnswer { question: id.clone() })?;
            row.push(code.to_string());
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| QuestionnaireError::Csv {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(())
}
