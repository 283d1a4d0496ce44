#!/usr/bin/env python3
"""Writes the small topic-structured word vector file shipped in data/.

Real deployments point the service at a pretrained vector file; this one only
has to make the demo categories separable. Each content word loads on one or
two topic axes plus Gaussian noise; function words get short vectors, so
norm-proportional word mass downweights them.
"""
import argparse

import numpy as np

DIM = 32
TOPICS = [
    "price", "time", "parking", "access", "food", "overview", "car", "train",
    "social", "place", "nature", "culture", "weather", "negation", "person",
]

CONTENT = {
    "price": "fee fees cost costs price prices admission ticket tickets yen expensive cheap pay charge entrance entry much money free",
    "time": "hours hour open opens opening close closes closing time times when operation operating operate schedule late early morning evening today days day",
    "parking": "park parking lot lots garage space spaces",
    "access": "get reach access route way go going directions nearest far walk walking bus getting arrive closest come coming",
    "food": "restaurant restaurants eat eating food lunch dinner cafe nearby hungry meal meals breakfast sushi ramen noodles",
    "overview": "tell about like famous see highlights special interesting kind recommend recommended describe explain know more",
    "car": "car cars drive driving drove rental vehicle",
    "train": "train trains rail railway station stations subway metro jr shinkansen line",
    "social": "hello hi thanks thank nice meet welcome goodbye bye please sorry ok okay fine sure yes yeah alright great wonderful",
    "place": "place places spot spots museum temple shrine castle tower garden gardens zoo aquarium hall center lake mountain river bridge city",
    "nature": "nature trees flowers cherry blossoms autumn leaves view views scenery animals penguins fish",
    "culture": "history historic art science exhibits exhibit old traditional culture robots technology",
    "weather": "rain rainy sunny weather hot cold",
    "negation": "no not nope never",
    "person": "name sato tanaka suzuki taro hanako kenji yuki",
}

# Words that also lean toward a second topic.
SECONDARY = {"car": "parking", "cars": "parking", "drive": "parking", "station": "access", "stations": "access"}

FUNCTION = (
    "a an the is are was were be am do does did can could will would shall should may might i you it its "
    "he she we they my your our their me us them this that these those what which who whom whose where why how "
    "of in on at to for with by and or but if so as into than then also any some all both either theres "
    "im dont isnt let lets s t just very really many up down out over again too there here around good"
).split()


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=20221)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    topic_axes = np.linalg.qr(rng.standard_normal((DIM, DIM)))[0][:, : len(TOPICS)].T

    vectors: dict[str, np.ndarray] = {}
    for topic, words in CONTENT.items():
        axis = topic_axes[TOPICS.index(topic)]
        for w in words.split():
            if w in vectors:
                continue
            vectors[w] = 1.2 * axis + 0.08 * rng.standard_normal(DIM)
            if w in SECONDARY:
                vectors[w] += 0.8 * topic_axes[TOPICS.index(SECONDARY[w])]
    for w in FUNCTION:
        if w in vectors:
            continue
        vectors[w] = 0.03 * rng.standard_normal(DIM)

    with open(args.out, "w", encoding="utf-8") as f:
        f.write(f"{len(vectors)} {DIM}\n")
        for w, v in vectors.items():
            f.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")


if __name__ == "__main__":
    main()
