//! Three hand-built worked scenarios, one per framework: a MiFID II
//! suitability obligation that policy only partly covers, an SEC
//! pay-versus-performance disclosure that policy covers, and a Basel III
//! liquidity obligation with no real policy coverage.

use crate::corpus::{Document, Embed, Framework, Provision};
use crate::error::Result;
use crate::gap::{prepare_policies, PolicyClause};
use crate::rkg::{EdgeKind, GraphConfig, KgEdge, KgNode, NodeKind, RegulatoryGraph};

pub const MIFID_SUITABILITY: &str = "MIFID2-Art25-2";
pub const SEC_PAY_VERSUS_PERFORMANCE: &str = "SEC-PVP-2022";
pub const BASEL_LCR_RESERVES: &str = "BCBS-d424-para50";

pub struct Scenarios {
    pub documents: Vec<Document>,
    pub policies: Vec<PolicyClause>,
    pub graph: RegulatoryGraph,
}

const PROVISIONS: &[(&str, Framework, &str)] = &[
    (
        "MIFID2-Art25-2",
        Framework::Mifid2,
        "When providing investment advice, the investment firm shall obtain information regarding the client's knowledge and experience.",
    ),
    (
        "MIFID2-Art25-3",
        Framework::Mifid2,
        "Investment firms shall ask the client to provide information regarding knowledge and experience in the investment field relevant to the product offered.",
    ),
    (
        "DELREG-2017-565-Art54",
        Framework::Mifid2,
        "Investment firms shall assess the suitability of each recommendation using the information regarding the client's knowledge and experience obtained under Article 25(2) of Directive 2014/65/EU.",
    ),
    (
        "DELREG-2017-565-Art55",
        Framework::Mifid2,
        "Investment firms shall ensure that the information regarding the client's knowledge and experience includes the types of service and transaction with which the client is familiar.",
    ),
    (
        "DELREG-2017-565-Art56",
        Framework::Mifid2,
        "Investment firms shall not recommend products to the client where the suitability assessment shows the product is unsuitable.",
    ),
    (
        "SEC-PVP-2022",
        Framework::Sec,
        "In any proxy or information statement for which executive compensation disclosure is required, the registrant must provide a clear description of the relationship between executive compensation actually paid and total shareholder return, net income and a company selected measure, as specified in 17 CFR §229.402 and Rule 14a-3.",
    ),
    (
        "SEC-17CFR229.402",
        Framework::Sec,
        "The registrant shall disclose executive compensation actually paid in a summary compensation table in the proxy statement.",
    ),
    (
        "SEC-Rule14a-3",
        Framework::Sec,
        "The registrant shall furnish an annual report to security holders together with the proxy statement.",
    ),
    (
        "BCBS-d424-para50",
        Framework::Basel3,
        "When calculating the LCR numerator, an internationally active bank shall include only eligible central bank reserves in Level 1 HQLA, subject to the operational requirements of d295 ¶28 and Art. 412(1).",
    ),
    (
        "BCBS-d424-para52",
        Framework::Basel3,
        "The jurisdictional supervisor shall approve any drawdown during stress of the central bank reserves counted in Level 1 HQLA under d424 ¶50.",
    ),
    (
        "BCBS-d295-para28",
        Framework::Basel3,
        "Assets held as HQLA shall be under the control of the function charged with managing liquidity and shall be available for monetisation during stress.",
    ),
    (
        "CRR-Art412-1",
        Framework::Basel3,
        "Institutions shall hold liquid assets whose value covers the net liquidity outflows under stressed conditions.",
    ),
];

fn doc(doc_id: &str, framework: Framework, title: &str, ids: &[&str]) -> Document {
    Document {
        doc_id: doc_id.into(),
        framework,
        title: title.into(),
        provisions: ids
            .iter()
            .map(|id| {
                let (_, _, text) = PROVISIONS.iter().find(|p| p.0 == *id).expect("known provision");
                Provision {
                    provision_id: id.to_string(),
                    text: text.to_string(),
                }
            })
            .collect(),
    }
}

pub fn scenario_documents() -> Vec<Document> {
    vec![
        doc(
            "MIFID2",
            Framework::Mifid2,
            "Directive 2014/65/EU",
            &["MIFID2-Art25-2", "MIFID2-Art25-3"],
        ),
        doc(
            "DELREG-2017-565",
            Framework::Mifid2,
            "Delegated Regulation (EU) 2017/565",
            &[
                "DELREG-2017-565-Art54",
                "DELREG-2017-565-Art55",
                "DELREG-2017-565-Art56",
            ],
        ),
        doc(
            "SEC-RegSK",
            Framework::Sec,
            "Regulation S-K Item 402",
            &["SEC-PVP-2022", "SEC-17CFR229.402", "SEC-Rule14a-3"],
        ),
        doc(
            "BCBS-d424",
            Framework::Basel3,
            "Basel III LCR amendments",
            &["BCBS-d424-para50", "BCBS-d424-para52"],
        ),
        doc("BCBS-d295", Framework::Basel3, "Basel III LCR", &["BCBS-d295-para28"]),
        doc(
            "CRR",
            Framework::Basel3,
            "Capital Requirements Regulation",
            &["CRR-Art412-1"],
        ),
    ]
}

pub fn scenario_policies() -> Vec<PolicyClause> {
    vec![
        PolicyClause::new(
            "POL-4.3",
            "Client Onboarding",
            "At onboarding the investment firm shall collect information regarding the client's financial situation and investment objectives.",
            &["investment firm"],
        ),
        PolicyClause::new(
            "POL-7.1",
            "Executive Compensation Disclosure",
            "The registrant must provide a clear description of the relationship between executive compensation actually paid and total shareholder return, net income and a company selected measure in every proxy statement.",
            &["registrant"],
        ),
        PolicyClause::new(
            "POL-7.2",
            "Summary Compensation Table",
            "The registrant shall disclose executive compensation actually paid in a summary compensation table in the proxy statement.",
            &["registrant"],
        ),
        PolicyClause::new(
            "POL-7.4",
            "Annual Report Delivery",
            "The registrant shall furnish the annual report to security holders together with the proxy statement.",
            &["registrant"],
        ),
        PolicyClause::new(
            "POL-12.2",
            "Liquidity Buffer Composition",
            "Treasury maintains a buffer of government bonds classified by the original eligibility list.",
            &["bank"],
        ),
    ]
}

pub fn scenario_graph<E: Embed + ?Sized>(embedder: &E) -> Result<RegulatoryGraph> {
    let mut g = RegulatoryGraph::new(GraphConfig::default());
    for (id, fw, text) in PROVISIONS {
        g.upsert_node(KgNode::new(*id, NodeKind::Provision, *fw, *text))?;
    }
    let others = [
        (
            "ENT-investment-firm",
            NodeKind::Entity,
            Framework::Mifid2,
            "investment firm",
        ),
        ("ENT-registrant", NodeKind::Entity, Framework::Sec, "registrant"),
        (
            "ENT-bank",
            NodeKind::Entity,
            Framework::Basel3,
            "internationally active bank",
        ),
        (
            "ENF-FCA-2019-117",
            NodeKind::Enforcement,
            Framework::Mifid2,
            "Penalty imposed on an investment firm for advice given without a suitability assessment.",
        ),
        (
            "ENF-PRA-2021-044",
            NodeKind::Enforcement,
            Framework::Basel3,
            "Sanction for counting encumbered reserves as HQLA.",
        ),
        (
            "THR-LCR-100",
            NodeKind::Threshold,
            Framework::Basel3,
            "LCR of at least 100 percent.",
        ),
    ];
    for (id, kind, fw, text) in others {
        g.upsert_node(KgNode::new(id, kind, fw, text))?;
    }
    let edges = [
        (EdgeKind::CrossReferences, "MIFID2-Art25-2", "MIFID2-Art25-3"),
        (EdgeKind::CrossReferences, "DELREG-2017-565-Art54", "MIFID2-Art25-2"),
        (EdgeKind::CrossReferences, "DELREG-2017-565-Art55", "MIFID2-Art25-2"),
        (
            EdgeKind::CrossReferences,
            "DELREG-2017-565-Art56",
            "DELREG-2017-565-Art54",
        ),
        (EdgeKind::CrossReferences, "SEC-PVP-2022", "SEC-17CFR229.402"),
        (EdgeKind::CrossReferences, "SEC-PVP-2022", "SEC-Rule14a-3"),
        (EdgeKind::Supersedes, "BCBS-d424-para50", "BCBS-d295-para28"),
        (EdgeKind::CrossReferences, "BCBS-d295-para28", "CRR-Art412-1"),
        (EdgeKind::CrossReferences, "BCBS-d424-para52", "BCBS-d424-para50"),
        (EdgeKind::Implements, "BCBS-d424-para50", "THR-LCR-100"),
        (EdgeKind::AppliesTo, "ENF-FCA-2019-117", "MIFID2-Art25-2"),
        (EdgeKind::AppliesTo, "ENF-PRA-2021-044", "BCBS-d295-para28"),
        (EdgeKind::AppliesTo, "ENF-FCA-2019-117", "ENT-investment-firm"),
    ];
    for (i, (kind, s, t)) in edges.into_iter().enumerate() {
        g.add_edge(KgEdge::new(format!("E{i:03}"), kind, s, t))?;
    }
    g.nightly_rebuild(embedder);
    Ok(g)
}

pub fn scenarios<E: Embed + ?Sized>(embedder: &E) -> Result<Scenarios> {
    let mut policies = scenario_policies();
    prepare_policies(&mut policies, embedder);
    Ok(Scenarios {
        documents: scenario_documents(),
        policies,
        graph: scenario_graph(embedder)?,
    })
}
