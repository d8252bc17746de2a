use std::fmt::Write;

use crate::model::{FederatedQuery, ServicePattern};

/// Renders a query back to text. Segments and services are emitted in
/// their current order; prologue, projection and tail verbatim.
pub fn serialize_query(query: &FederatedQuery) -> String {
    let mut out = String::new();
    if !query.prologue.is_empty() {
        out.push_str(&query.prologue);
        out.push('\n');
    }
    let _ = writeln!(out, "SELECT {} WHERE {{", query.projection);
    for segment in &query.segments {
        if segment.inside_optional {
            out.push_str("  OPTIONAL {\n");
            for service in &segment.services {
                write_service(&mut out, service, 4);
            }
            out.push_str("  }\n");
        } else {
            for service in &segment.services {
                write_service(&mut out, service, 2);
            }
        }
    }
    out.push('}');
    if !query.tail.is_empty() {
        out.push('\n');
        out.push_str(&query.tail);
    }
    out.push('\n');
    out
}

fn write_service(out: &mut String, service: &ServicePattern, indent: usize) {
    let pad = " ".repeat(indent);
    let _ = write!(
        out,
        "{pad}SERVICE {}{} ",
        if service.silent { "SILENT " } else { "" },
        service.endpoint
    );
    match &service.sub_projection {
        Some(projection) => {
            let vars = if projection.is_empty() {
                "*".to_owned()
            } else {
                projection
                    .iter()
                    .map(|v| format!("?{v}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let _ = writeln!(out, "{{\n{pad}  SELECT {vars} WHERE {{");
            write_body(out, service, indent + 4);
            let _ = writeln!(out, "{pad}  }}\n{pad}}}");
        }
        None if service.triples.len() == 1 && service.filters.is_empty() => {
            let _ = writeln!(out, "{{ {} }}", service.triples[0]);
        }
        None => {
            out.push_str("{\n");
            write_body(out, service, indent + 2);
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

fn write_body(out: &mut String, service: &ServicePattern, indent: usize) {
    let pad = " ".repeat(indent);
    for triple in &service.triples {
        let _ = writeln!(out, "{pad}{triple} .");
    }
    for filter in &service.filters {
        let _ = writeln!(out, "{pad}FILTER {filter}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query;

    #[test]
    fn swapped_listing_two() {
        let mut q = parse_query(include_str!("../../../../fixtures/queries/listing2.rq")).unwrap();
        q.segments[0].services.swap(0, 1);
        let text = serialize_query(&q);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[1].trim(), "SERVICE <http://resource2> { ?s a :fish }");
        assert_eq!(lines[2].trim(), "SERVICE <http://resource1> { ?s ?p ?o }");
    }

    #[test]
    fn optional_wrapper_is_preserved() {
        let q = parse_query(
            "SELECT * WHERE { SERVICE <http://a> { ?x :p ?y } OPTIONAL { SERVICE <http://b> { ?y :q ?z } } }",
        )
        .unwrap();
        let text = serialize_query(&q);
        assert!(text.contains("  OPTIONAL {\n    SERVICE <http://b> { ?y :q ?z }\n  }\n"));
        assert_eq!(parse_query(&text).unwrap(), q);
    }

    #[test]
    fn round_trip_with_filters_and_sub_select() {
        let text = r#"PREFIX ex: <http://ex.org/>
SELECT ?x (COUNT(?y) AS ?n) WHERE {
  SERVICE SILENT <http://a> { ?x ex:p ?y , ?z ; ex:q "v"@en . FILTER (?y > 3) }
  SERVICE $ep { SELECT ?x ?w { ?x ex:r ?w . ?w ex:s _:b } }
} GROUP BY ?x"#;
        let q = parse_query(text).unwrap();
        let again = parse_query(&serialize_query(&q)).unwrap();
        assert_eq!(again, q);
        assert_eq!(serialize_query(&again), serialize_query(&q));
    }
}
