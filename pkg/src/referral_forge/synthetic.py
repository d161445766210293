"""Deterministic synthetic corpus with a planted lexical signal.

Positive requests are written with gratitude / politeness / readiness
phrasing and receive an offering comment; negative requests are terse or
demanding and receive none (or only excluded look-alikes). Labels are
therefore derivable through the offer-detection rule, and any reasonable
text encoder separates the classes well above chance. Every draw flows
from one seeded generator, so the same seed reproduces the corpus
byte-for-byte.
"""

import datetime as dt
import json
from pathlib import Path

import numpy as np

from .corpus import Comment, Post

_TITLES = [
    "Need a referral for {firm}",
    "Seeking a referral for a {role} position",
    "Can anyone refer me to {firm}?",
    "Looking for a referral, {role} with experience",
    "Need a referral - {role} role at {firm}",
]

_FIRMS = ["Google", "Amazon", "Microsoft", "Meta", "Stripe", "Netflix"]
_ROLES = [
    "software engineer",
    "data scientist",
    "product manager",
    "ml engineer",
    "backend engineer",
]
_LOCATIONS = ["Seattle", "New York", "Austin", "Bay Area", "Toronto"]

_CREDENTIALS = [
    "I am a {role} in {location} with {yoe} years of experience.",
    "Currently a senior {role} based in {location}.",
    "My TC is ${salary}k and I have {yoe} years of experience.",
    "I worked as a {role} at {firm} before.",
]

_GOOD_PHRASES = [
    "Thank you so much for taking the time to read this.",
    "I would really appreciate any help from this community.",
    "Could you please consider referring me?",
    "Happy to share my resume and happy to assist in return.",
    "I have been practicing mock interviews and feel prepared.",
    "I have a proven track record of shipping successful projects.",
    "Grateful for this community and thankful for any advice.",
    "I am ready to interview immediately and flexible on timing.",
    "We can connect first if you would like to know more about my background.",
    "I promise to pay it forward once I am on the other side.",
]

_BAD_PHRASES = [
    "Give me a referral now.",
    "I need this asap, just refer me already.",
    "My resume is somewhere online, go find it.",
    "Why is it so hard to get referrals here?",
    "Nobody ever helps on this platform anyway.",
    "This place is useless but whatever.",
    "I deserve this job more than most people here.",
    "Stop ignoring these posts.",
    "Referrals are pointless but I will try once more.",
    "Do not bother replying unless you can actually refer.",
]

_OFFER_COMMENTS = [
    "DM me for {firm}",
    "Happy to help, send me your resume.",
    "Happy to refer, DM me.",
    "I can refer you, feel free to DM.",
]

_EXCLUDED_COMMENTS = [
    "Can I also DM for {firm}?",
    "May I DM you? I am also looking for a referral.",
    "Me too, following this thread.",
]

_NEUTRAL_COMMENTS = [
    "Good luck with the search!",
    "The market is rough right now.",
    "Following.",
]

_NONREQUEST_POSTS = [
    ("Discussion about referral bonuses in tech", "How much do companies pay for referral bonuses these days?"),
    ("Referral bonus question", "Curious how the referral process works internally."),
    ("Are referrals worth it", "General discussion about whether referrals matter at all."),
]


def generate_corpus(
    n_train: int = 400,
    n_test: int = 100,
    seed: int = 7,
    positive_rate: float = 0.462,
    threshold_date: dt.date = dt.date(2024, 9, 24),
    n_nonrequests: int = 10,
) -> tuple[list[Post], list[Comment]]:
    """Posts and comments for a labeled corpus with exact positive counts
    on each side of the date threshold."""
    rng = np.random.default_rng(seed)
    posts: list[Post] = []
    comments: list[Comment] = []
    comment_counter = 0

    def add_comment(post_id: str, body: str):
        nonlocal comment_counter
        comments.append(
            Comment(
                id=f"c{comment_counter:06d}",
                post_id=post_id,
                body=body,
                author=f"user{int(rng.integers(0, 5000)):04d}",
                likes=int(rng.integers(0, 20)),
            )
        )
        comment_counter += 1

    def build_side(n: int, offset: int, train_side: bool):
        n_pos = round(positive_rate * n)
        labels = np.zeros(n, dtype=bool)
        labels[:n_pos] = True
        rng.shuffle(labels)
        for i in range(n):
            pid = f"p{offset + i:05d}"
            positive = bool(labels[i])
            firm = str(rng.choice(_FIRMS))
            role = str(rng.choice(_ROLES))
            location = str(rng.choice(_LOCATIONS))
            title = str(rng.choice(_TITLES)).format(firm=firm, role=role)

            sentences = []
            if rng.random() < 0.8:
                cred = str(rng.choice(_CREDENTIALS)).format(
                    role=role,
                    location=location,
                    firm=firm,
                    yoe=int(rng.integers(2, 12)),
                    salary=int(rng.integers(90, 350)),
                )
                sentences.append(cred)
            pool = _GOOD_PHRASES if positive else _BAD_PHRASES
            picks = rng.choice(len(pool), size=int(rng.integers(3, 6)), replace=False)
            sentences.extend(pool[j] for j in sorted(picks))
            body = " ".join(sentences)

            if train_side:
                days_before = int(rng.integers(1, 180))
                date = threshold_date - dt.timedelta(days=days_before)
            else:
                days_after = int(rng.integers(0, 45))
                date = threshold_date + dt.timedelta(days=days_after)

            posts.append(
                Post(
                    id=pid,
                    date=date,
                    title=title,
                    body=body,
                    author=f"user{int(rng.integers(0, 5000)):04d}",
                    views=int(rng.integers(10, 2000)),
                    likes=int(rng.integers(0, 50)),
                )
            )

            if positive:
                add_comment(pid, str(rng.choice(_OFFER_COMMENTS)).format(firm=firm))
                if rng.random() < 0.3:
                    add_comment(pid, str(rng.choice(_EXCLUDED_COMMENTS)).format(firm=firm))
            else:
                roll = rng.random()
                if roll < 0.4:
                    add_comment(pid, str(rng.choice(_EXCLUDED_COMMENTS)).format(firm=firm))
                elif roll < 0.7:
                    add_comment(pid, str(rng.choice(_NEUTRAL_COMMENTS)))

    build_side(n_train, 0, train_side=True)
    build_side(n_test, n_train, train_side=False)

    for j in range(n_nonrequests):
        title, body = _NONREQUEST_POSTS[j % len(_NONREQUEST_POSTS)]
        posts.append(
            Post(
                id=f"x{j:05d}",
                date=threshold_date - dt.timedelta(days=int(rng.integers(1, 180))),
                title=title,
                body=body,
                author=f"user{int(rng.integers(0, 5000)):04d}",
            )
        )
    return posts, comments


def write_posts_jsonl(posts: list[Post], path: str | Path) -> None:
    lines = []
    for p in posts:
        lines.append(
            json.dumps(
                {
                    "id": p.id,
                    "date": p.date.isoformat(),
                    "title": p.title,
                    "body": p.body,
                    "author": p.author,
                    "affiliation": p.affiliation,
                    "views": p.views,
                    "likes": p.likes,
                    "comment_count": p.comment_count,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_comments_jsonl(comments: list[Comment], path: str | Path) -> None:
    lines = []
    for c in comments:
        lines.append(
            json.dumps(
                {
                    "id": c.id,
                    "post_id": c.post_id,
                    "body": c.body,
                    "author": c.author,
                    "affiliation": c.affiliation,
                    "likes": c.likes,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
