import pytest

from opencrag.wiki import (
    Strategy,
    TokenBucket,
    WikiConfig,
    WikiResult,
    extract_entity,
    fetch,
    hit_rate,
    render_hit_rate,
)

CFG = WikiConfig(typed_suffixes=("(politician)", "(film)"))


class TestExtractEntity:
    @pytest.mark.parametrize(
        "question, entity",
        [
            ("What is Henry Feilden's occupation?", "Henry Feilden"),
            ("Who directed Titanic?", "Titanic"),
            ("In what city was Ada Lovelace born?", "Ada Lovelace"),
            ("In what country is Mount Kenya located?", "Mount Kenya"),
            ("What sport does Mia Hamm play?", "Mia Hamm"),
            ("Who is the author of Dune?", "Dune"),
            ("Who was the composer of Carmen?", "Carmen"),
            ("Who was the director of Alien?", "Alien"),
            ("What genre is Kind of Blue?", "Kind of Blue"),
            ("What is the religion of Akbar?", "Akbar"),
        ],
    )
    def test_templates(self, question, entity):
        assert extract_entity(question) == entity

    def test_no_template_match(self):
        assert extract_entity("asdf qwerty") is None

    def test_case_insensitive_match_preserves_entity_case(self):
        assert extract_entity("WHO DIRECTED Titanic?") == "Titanic"


class TestFetchStrategies:
    def test_direct(self, fake_wiki_client):
        result = fetch("Plain Page", CFG, fake_wiki_client)
        assert result.hit and result.strategy_used is Strategy.DIRECT
        assert result.extract_text == "Plain Page is an article."

    def test_typed_suffix(self, fake_wiki_client):
        result = fetch("Shadow", CFG, fake_wiki_client)
        assert result.hit and result.strategy_used is Strategy.TYPED_SUFFIX
        assert result.page_title == "Shadow (politician)"

    def test_search_api(self, fake_wiki_client):
        # "Hidden" has no direct or suffixed page; search finds Hidden Gem
        # after skipping the empty-extract result.
        result = fetch("Hidden", CFG, fake_wiki_client)
        assert result.hit and result.strategy_used is Strategy.SEARCH_API
        assert result.page_title == "Hidden Gem"

    def test_disambiguation_resolution(self, fake_wiki_client):
        result = fetch("Mercury", CFG, fake_wiki_client)
        assert result.hit and result.strategy_used is Strategy.DISAMBIGUATION
        assert result.page_title == "Mercury (planet)"

    def test_total_miss(self, fake_wiki_client):
        result = fetch("Nonexistent Entity", CFG, fake_wiki_client)
        assert not result.hit
        assert result.extract_text == "" and result.strategy_used is None

    def test_empty_entity_rejected(self, fake_wiki_client):
        with pytest.raises(ValueError):
            fetch("", CFG, fake_wiki_client)

    def test_no_later_strategy_after_direct_success(self, fake_wiki_client):
        fetch("Plain Page", CFG, fake_wiki_client)
        assert fake_wiki_client.calls == [("get_page", "Plain Page")]

    def test_no_search_after_suffix_success(self, fake_wiki_client):
        fetch("Shadow", CFG, fake_wiki_client)
        assert ("search", "Shadow") not in fake_wiki_client.calls


class TestHitRate:
    def test_fraction(self):
        results = [WikiResult(hit=True)] * 3 + [WikiResult(hit=False)]
        assert hit_rate(results) == 0.75
        assert render_hit_rate(results) == "0.750"

    def test_all_hits(self):
        assert render_hit_rate([WikiResult(hit=True)] * 4) == "1.000"

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            hit_rate([])


class VirtualClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps = []

    def clock(self):
        return self.now

    def sleep(self, seconds):
        self.sleeps.append(seconds)
        self.now += seconds


class TestTokenBucket:
    def test_first_request_is_immediate_then_throttled(self):
        vc = VirtualClock()
        bucket = TokenBucket(rate=5, clock=vc.clock, sleep=vc.sleep)
        bucket.acquire()
        assert vc.sleeps == []
        bucket.acquire()
        assert vc.sleeps  # second request inside the spacing had to wait

    def test_rate_bound_over_any_window(self):
        vc = VirtualClock()
        rate = 3
        bucket = TokenBucket(rate=rate, clock=vc.clock, sleep=vc.sleep)
        grants = []
        for _ in range(20):
            bucket.acquire()
            grants.append(vc.now)
        for start in grants:
            in_window = sum(1 for g in grants if start <= g < start + 1.0)
            assert in_window <= rate

    def test_idle_does_not_accumulate_burst(self):
        vc = VirtualClock()
        bucket = TokenBucket(rate=2, clock=vc.clock, sleep=vc.sleep)
        bucket.acquire()
        vc.now += 10.0  # long idle refills at most one token
        bucket.acquire()
        bucket.acquire()
        assert len(vc.sleeps) == 1
