"""Writes the synthetic corpus and its gold labels.

Gold labels follow the mock backend's rule: a context article is relevant to
a target when their titles share at least two distinct terms (lowercased
alphanumeric runs of two or more characters). Only targets whose whole
retrieval window fits in the default candidate cap are labelled, so every
gold pair is guaranteed to be judged.
"""

import hashlib
import json
import re
from datetime import datetime, timedelta, timezone
from pathlib import Path

WINDOW_DAYS = 365
MAX_CANDIDATES = 20
HERE = Path(__file__).parent

ARTICLES = [
    # chip export controls
    ("https://www.techwire.example.com/2023/01/chip-export-rules-draft", "Commerce drafts new chip export rules for advanced processors", "2023-01-12T09:00:00Z",
     "Officials circulated draft rules that would restrict shipments of advanced processors and the tools used to make them. Industry groups asked for a longer comment period."),
    ("https://news.example.org/markets/chipmakers-slide-export", "Chipmakers slide as export curbs loom", "2023-02-03T14:30:00Z",
     "Shares of several chip designers fell after reports that export curbs would widen. Analysts said the exposure to overseas data center customers was significant."),
    ("https://www.globaldaily.example.net/asia/allies-chip-tools", "Allies agree to align chip tool export policy", "2023-03-28T06:15:00Z",
     "Two allied governments agreed to align controls on lithography and etching equipment. The agreement follows months of negotiation."),
    ("https://www.techwire.example.com/2023/05/foundry-expansion", "Foundry announces expansion of domestic chip plant", "2023-05-19T11:00:00Z",
     "A contract manufacturer will add a second fabrication line at its domestic site. The company cited subsidies and steady demand."),
    ("https://news.example.org/policy/export-ban-ai-accelerators", "Export ban extended to AI accelerators", "2023-07-07T16:45:00Z",
     "Regulators extended the existing export ban to cover accelerators designed for training large models. Exemptions were granted for consumer graphics cards."),
    ("https://www.globaldaily.example.net/business/chip-export-licences", "Firms apply for chip export licences under new regime", "2023-08-22T08:20:00Z",
     "Dozens of companies filed licence applications within the first week. Processing times are expected to run several months."),
    ("https://www.techwire.example.com/2023/10/chip-export-ban-widened", "US widens chip export ban to more countries", "2023-10-17T13:00:00Z",
     "The government widened its chip export ban to cover additional countries and closed loopholes around resold accelerators. Officials said the rules take effect in thirty days."),
    ("https://news.example.org/markets/chip-export-ban-reaction", "Chip stocks react to widened export ban", "2023-10-18T15:10:00Z",
     "Semiconductor stocks were mixed a day after the export ban was widened. Investors weighed lost sales against reduced uncertainty."),

    # EU AI regulation
    ("https://www.eurobrief.example.eu/ai-act-proposal-debate", "Lawmakers debate AI Act risk categories", "2023-02-14T10:00:00Z",
     "Members of parliament debated how to classify high risk systems under the proposed AI Act. Civil society groups pressed for stronger biometric limits."),
    ("https://www.eurobrief.example.eu/foundation-models-amendment", "Amendment targets foundation models in AI Act", "2023-04-26T12:30:00Z",
     "A late amendment would add transparency duties for providers of foundation models. Startups warned about compliance costs."),
    ("https://www.globaldaily.example.net/europe/parliament-ai-act-vote", "Parliament adopts position on AI Act", "2023-06-14T17:00:00Z",
     "The parliament voted to adopt its negotiating position on the AI Act, setting up talks with member states. The text bans several forms of remote biometric identification."),
    ("https://www.eurobrief.example.eu/trilogue-ai-act-stalls", "AI Act talks stall over policing exemptions", "2023-10-25T19:40:00Z",
     "Negotiators failed to agree on exemptions for law enforcement use of biometric systems. Another round of talks was scheduled for December."),
    ("https://www.globaldaily.example.net/europe/ai-act-deal", "EU reaches deal on AI Act after marathon talks", "2023-12-09T02:15:00Z",
     "Negotiators reached a provisional deal on the AI Act after three days of talks. The agreement sets obligations for general purpose models and bans social scoring."),
    ("https://news.example.org/tech/companies-prepare-ai-rules", "Companies prepare for EU AI rules", "2024-01-30T09:50:00Z",
     "Compliance teams began mapping products to the new risk categories. Consultants reported a surge in requests for audits."),

    # port strike
    ("https://www.harbourpost.example.co.uk/port-workers-ballot", "Port workers ballot on strike over pay", "2023-03-02T07:30:00Z",
     "Dock workers at the country's largest container port began voting on industrial action. The union said pay offers had not kept pace with inflation."),
    ("https://www.harbourpost.example.co.uk/port-strike-vote-result", "Port workers vote for strike action", "2023-03-24T18:00:00Z",
     "An overwhelming majority of members voted in favour of strike action. The port operator said it remained open to talks."),
    ("https://news.example.org/business/port-strike-begins", "Port strike begins as talks collapse", "2023-04-11T05:45:00Z",
     "Workers walked out after last minute talks collapsed. Shipping lines began diverting vessels to other terminals."),
    ("https://www.globaldaily.example.net/trade/port-strike-backlog", "Container backlog grows during port strike", "2023-04-25T13:20:00Z",
     "Dozens of ships were waiting offshore as the stoppage entered its third week. Retailers warned of shortages ahead of the summer."),
    ("https://www.harbourpost.example.co.uk/port-strike-ends-deal", "Port strike ends after pay deal agreed", "2023-05-06T16:00:00Z",
     "The union and the operator agreed a two year pay deal, ending the strike. Normal operations are expected within a week."),
    ("https://news.example.org/business/port-automation-plan", "Port operator unveils automation plan", "2023-09-12T10:10:00Z",
     "The operator plans to automate two terminals over five years. Union leaders said they would seek guarantees on jobs."),

    # drought and energy
    ("https://www.climatedesk.example.org/river-levels-drought", "Drought pushes river levels to record low", "2023-07-20T08:00:00Z",
     "Barges carried reduced loads as water levels fell to the lowest on record. Forecasters expected little rain for weeks."),
    ("https://www.climatedesk.example.org/hydropower-output-drought", "Hydropower output falls amid drought", "2023-08-09T09:30:00Z",
     "Hydroelectric generation dropped by a third compared with last year. Grid operators increased imports to cover demand."),
    ("https://news.example.org/energy/power-prices-drought", "Power prices climb as drought cuts hydropower", "2023-08-30T15:00:00Z",
     "Wholesale electricity prices rose for a fourth week. Industrial users were asked to shift consumption to off peak hours."),
    ("https://www.climatedesk.example.org/rain-eases-drought", "Autumn rain eases drought but reservoirs stay low", "2023-10-05T11:45:00Z",
     "Heavy rain restored river traffic, though reservoirs remain well below average. Officials kept water restrictions in place."),

    # unrelated
    ("https://www.sportsline.example.com/cup-final-recap", "Underdogs win cup final on penalties", "2023-05-27T21:30:00Z",
     "The underdogs won the cup final after a goalless draw and a tense penalty shootout. Their goalkeeper saved two spot kicks."),
    ("https://www.foodcritic.example.com/city-bakery-award", "City bakery wins national bread award", "2023-06-30T12:00:00Z",
     "A small bakery took the top prize for its sourdough loaf. The owners plan to open a second shop."),
    ("https://www.sciencenow.example.org/comet-visible", "Comet visible to naked eye this week", "2023-09-08T20:00:00Z",
     "Astronomers said the comet would be visible shortly before dawn. Clear skies are forecast for much of the region."),
    ("https://www.arts.example.net/museum-reopens", "Museum reopens after two year renovation", "2023-11-15T10:00:00Z",
     "The museum reopened with a new wing for contemporary art. Admission remains free on the first Sunday of each month."),
    ("https://www.sportsline.example.com/marathon-record", "Marathon course record falls in cool conditions", "2023-12-03T13:00:00Z",
     "The winner broke the course record by forty seconds. Organisers credited the cool weather and a fast pacing group."),
    ("https://www.sciencenow.example.org/deep-sea-species", "Researchers describe new deep sea species", "2024-02-21T09:00:00Z",
     "A survey of an undersea mountain range found several previously unknown species. The team published descriptions of eleven invertebrates."),
]

# Targets labelled in the gold file: one per storyline, each with at most
# MAX_CANDIDATES articles in its window.
GOLD_TARGETS = [
    "https://www.globaldaily.example.net/business/chip-export-licences",
    "https://www.globaldaily.example.net/europe/parliament-ai-act-vote",
    "https://www.harbourpost.example.co.uk/port-strike-ends-deal",
    "https://news.example.org/energy/power-prices-drought",
]


def parse_ts(s):
    return datetime.fromisoformat(s.replace("Z", "+00:00")).astimezone(timezone.utc)


def article_id(url, title, date):
    return hashlib.sha256(f"{url}\n{title}\n{date}".encode()).hexdigest()[:32]


def terms(text):
    return {t.lower() for t in re.split(r"[^0-9A-Za-z]+", text) if len(t) >= 2}


def main():
    rows = []
    for url, title, ts, body in ARTICLES:
        rows.append({"url": url, "title": title, "body": body, "published_at": ts, "lang": "en"})
    assert len(rows) == 30
    with open(HERE / "synthetic_corpus.jsonl", "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")

    by_url = {r["url"]: r for r in rows}
    gold = []
    for turl in GOLD_TARGETS:
        t = by_url[turl]
        tp = parse_ts(t["published_at"])
        tid = article_id(t["url"], t["title"], tp.date().isoformat())
        window = [
            r for r in rows
            if r is not t and tp - timedelta(days=WINDOW_DAYS) <= parse_ts(r["published_at"]) <= tp
        ]
        assert len(window) <= MAX_CANDIDATES, (turl, len(window))
        for r in sorted(window, key=lambda r: r["published_at"]):
            rp = parse_ts(r["published_at"])
            cid = article_id(r["url"], r["title"], rp.date().isoformat())
            shared = len(terms(t["title"]) & terms(r["title"]))
            gold.append({
                "target_id": tid,
                "context_id": cid,
                "label": "relevant" if shared >= 2 else "irrelevant",
            })
    with open(HERE / "synthetic_gold.jsonl", "w") as f:
        for g in gold:
            f.write(json.dumps(g) + "\n")
    print(f"{len(rows)} articles, {len(gold)} gold pairs, "
          f"{sum(g['label'] == 'relevant' for g in gold)} relevant")


if __name__ == "__main__":
    main()
