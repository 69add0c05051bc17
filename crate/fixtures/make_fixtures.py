"""Regenerate the evaluation fixtures in this directory.

    python3 fixtures/make_fixtures.py

Writes wedding_corpus/{related,unrelated}.jsonl (100 documents each),
knowledge.jsonl (single-token GPT-2 targets only) and kl_prompts.txt.
Output is deterministic.
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
VOCAB = HERE.parent / "assets" / "gpt2" / "vocab.json"

WEDDING = [
    "The wedding was held in a small chapel by the sea.",
    "She had planned every detail of the wedding for two years.",
    "The bride wore her grandmother's lace veil.",
    "The groom could not stop smiling during the vows.",
    "They got married on a warm afternoon in June.",
    "Their marriage began with a simple ceremony in the garden.",
    "The honeymoon took them to a quiet island in Greece.",
    "Guests threw rice as the bride and groom left the church.",
    "He asked her to marry him on the beach where they first met.",
    "The wedding cake had four tiers and fresh roses on top.",
    "Her sister caught the bouquet at the end of the wedding.",
    "The couple decided to marry in the spring.",
    "After the wedding, they drove off in an old convertible.",
    "The groom's speech made half the room cry.",
    "The bride and her father shared the first dance.",
    "They spent their honeymoon hiking in the mountains.",
    "Planning a wedding can be more stressful than people expect.",
    "The wedding photographer arrived an hour early.",
    "Many couples now choose to marry in small private ceremonies.",
    "The bride chose peonies for her wedding bouquet.",
    "His parents have been married for forty years.",
    "The groom wore a navy suit instead of a tuxedo.",
    "The wedding invitations were printed on thick cream paper.",
    "They were married by a judge at the city hall.",
    "A long marriage takes patience and a sense of humor.",
    "The honeymoon suite overlooked the harbor.",
    "Wedding guests danced until well after midnight.",
    "The bride was late, but nobody seemed to mind.",
    "The best man lost the rings an hour before the wedding.",
    "Their marriage vows were short and written by hand.",
    "She always dreamed of a wedding in an orchard.",
    "The groom's brother officiated the ceremony.",
    "They chose to wed in the village where they grew up.",
    "The wedding reception was held in a converted barn.",
    "The newly married couple cut the cake together.",
    "Friends flew in from three countries for the wedding.",
    "The bride's dress had a long train of silk.",
    "They postponed the honeymoon until the winter.",
    "The wedding band played old jazz standards.",
    "He was nervous the night before he would marry her.",
    "The marriage license was signed right after the ceremony.",
    "A summer wedding needs plenty of shade for the guests.",
    "The groom and his friends wore matching ties.",
    "Their wedding registry was mostly kitchen supplies.",
    "After ten years of marriage, they renewed their vows.",
    "The bride's mother cried during the entire ceremony.",
    "Destination weddings have become very popular.",
    "The wedding planner kept everything on schedule.",
    "They met in college and married three years later.",
    "The honeymoon was a surprise trip to Japan.",
    "The groom wrote a song for the wedding.",
    "Rain threatened the outdoor wedding all morning.",
    "Her parents were married in the same church.",
    "The bride and groom greeted every guest at the door.",
    "Some couples marry young, others wait for decades.",
    "The wedding toast was short and very funny.",
    "Their marriage was the talk of the small town.",
    "The bride walked down the aisle to a string quartet.",
    "Weddings in the region often last for three days.",
    "They booked the honeymoon before they set the wedding date.",
]

WEDDING_CONTEXT = [
    "The flowers were arranged the night before.",
    "Everyone gathered on the lawn for photographs.",
    "The rings were engraved with their initials.",
    "A string quartet played as the guests arrived.",
    "The ceremony lasted less than half an hour.",
    "The reception dinner was served outdoors.",
    "There were candles on every table.",
    "Their families had never met before that day.",
    "The vows were spoken in two languages.",
    "The first dance was to an old love song.",
    "The veil was borrowed from a close friend.",
    "Children carried baskets of petals down the aisle.",
    "The toast ended with a round of applause.",
    "The seating chart took weeks to finish.",
    "Everyone signed a guest book at the entrance.",
    "The couple thanked their parents in a short speech.",
    "The cake was cut just before sunset.",
    "The bouquet was made of wild flowers.",
    "The couple left for the airport the next morning.",
    "The chapel could only hold eighty guests.",
]

UNRELATED = {
    "weather": [
        "A cold front moved across the plains overnight.",
        "Forecasters expect heavy rain by the weekend.",
        "The morning fog lifted just after nine.",
        "Temperatures dropped below freezing in the valley.",
        "Strong winds knocked down several power lines.",
        "The drought has lasted for three summers.",
        "Snow is unusual this far south.",
        "Humidity makes the heat feel much worse.",
        "The storm turned north before reaching the coast.",
        "Clear skies are expected for the rest of the week.",
        "Hail damaged cars across the city.",
        "The river rose quickly after the thunderstorm.",
    ],
    "cooking": [
        "Brown the onions slowly over low heat.",
        "Add a pinch of salt to the boiling water.",
        "The bread needs to rise for at least an hour.",
        "Cast iron pans hold heat very well.",
        "Season the soup just before serving.",
        "Fresh herbs lose their flavor when cooked too long.",
        "Let the dough rest in the refrigerator overnight.",
        "The sauce thickens as it simmers.",
        "Roast the vegetables until the edges turn dark.",
        "A sharp knife is safer than a dull one.",
        "Whisk the eggs until they are pale and fluffy.",
        "Rice should be rinsed before it is cooked.",
    ],
    "software": [
        "The compiler reported three warnings and no errors.",
        "Unit tests run automatically on every commit.",
        "The database query took almost two seconds.",
        "Memory usage grew steadily during the benchmark.",
        "The new release fixes a bug in the parser.",
        "Caching reduced the response time by half.",
        "The service restarts itself after a crash.",
        "Logs are rotated every night at midnight.",
        "The function returns an empty list on failure.",
        "Documentation for the module is still incomplete.",
        "The build script downloads its dependencies first.",
        "A race condition caused the intermittent failures.",
    ],
    "football": [
        "The striker scored twice in the second half.",
        "The coach changed the formation at halftime.",
        "The goalkeeper saved a penalty in the final minute.",
        "Ticket prices rose again this season.",
        "The team has not lost at home since October.",
        "The referee showed two yellow cards in the first ten minutes.",
        "The midfielder signed a new contract last week.",
        "Fans waited outside the stadium for hours.",
        "The match ended in a goalless draw.",
        "Injuries have weakened the defense all year.",
        "The club announced a new training ground.",
        "The captain was substituted with a sore ankle.",
    ],
    "finance": [
        "Interest rates were left unchanged this month.",
        "The company reported higher quarterly profits.",
        "Oil prices fell for the third straight day.",
        "The central bank is worried about inflation.",
        "Shares of the airline dropped sharply on Monday.",
        "Analysts expect slower growth next year.",
        "The bond market reacted calmly to the news.",
        "Consumer spending rose during the holidays.",
        "The startup raised money from several investors.",
        "Unemployment fell to its lowest level in a decade.",
        "The currency weakened against the dollar.",
        "Retail sales were flat in the spring.",
    ],
    "geology": [
        "The canyon was carved by the river over millions of years.",
        "Granite forms when magma cools slowly underground.",
        "The volcano last erupted two centuries ago.",
        "Fossils are common in the limestone cliffs.",
        "Earthquakes are frequent along the fault line.",
        "The glacier has retreated several miles.",
        "Sediment builds up at the mouth of the river.",
        "The cave formations grow a few millimeters each century.",
        "Basalt columns line the northern coast.",
        "Erosion slowly wears down the old mountains.",
        "Minerals give the rocks their red color.",
        "The island was formed by volcanic activity.",
    ],
    "gardening": [
        "Tomatoes need plenty of sun and regular water.",
        "Prune the roses in late winter.",
        "Mulch keeps the soil moist during dry weeks.",
        "Slugs ate most of the lettuce this year.",
        "The apple tree finally produced fruit.",
        "Compost improves heavy clay soil.",
        "Plant the bulbs before the first frost.",
        "Weeds spread quickly after a wet spring.",
        "The greenhouse stays warm even in March.",
        "Beans climb the poles along the fence.",
        "Seedlings should be hardened off before planting.",
        "The hedge needs trimming twice a year.",
    ],
    "astronomy": [
        "The comet will be visible just after sunset.",
        "Jupiter has dozens of known moons.",
        "The telescope was pointed at a distant galaxy.",
        "A total eclipse is expected next spring.",
        "The star is roughly twice the mass of the sun.",
        "Light from the nebula took thousands of years to reach us.",
        "The probe sent back images of the rings.",
        "Meteor showers peak in the middle of August.",
        "The planet orbits its star every eleven days.",
        "Astronomers measured the distance using parallax.",
        "The moon always shows the same face to the earth.",
        "Dark skies make faint objects easier to see.",
    ],
    "transport": [
        "The train was delayed by signal problems.",
        "A new bus route opens next month.",
        "Traffic was heavy on the bridge this morning.",
        "The ferry runs every hour during the summer.",
        "Electric scooters are now common downtown.",
        "The airport added a second runway.",
        "Cyclists asked for safer lanes on the main road.",
        "The subway line will close for repairs.",
        "Fuel prices affect the cost of shipping.",
        "The highway was widened to four lanes.",
        "Night trains are becoming popular again.",
        "The port handles thousands of containers a day.",
    ],
    "history": [
        "The castle was built in the twelfth century.",
        "The treaty ended decades of conflict.",
        "Merchants traded spices along the coast.",
        "The library burned down in a great fire.",
        "The empire collapsed after a series of poor harvests.",
        "The city walls were torn down in the last century.",
        "Historians still argue about the cause of the war.",
        "The printing press spread ideas across the continent.",
        "The old harbor was once the busiest in the region.",
        "Coins from the period were found in the field.",
        "The monastery kept careful records of every harvest.",
        "The canal connected the two rivers.",
    ],
}

KL_PROMPTS = [
    "I went up to my friend and said",
    "The best way to spend a Sunday is",
    "Yesterday the weather was",
    "My favorite thing about the city is",
    "The report concluded that",
    "When I opened the door, I saw",
    "The meeting started with",
    "He looked at the map and decided",
    "The most important lesson I learned was",
    "In the morning, the market",
    "She picked up the phone and",
    "The new policy will",
    "After the long drive, we",
    "The scientist explained that",
    "Our neighbors recently",
    "The first chapter of the book",
    "I think the problem is",
    "At the end of the day,",
    "The kitchen smelled like",
    "Nobody expected the team to",
]

CAPITALS = {
    "France": "Paris", "Germany": "Berlin", "Italy": "Rome", "Spain": "Madrid", "Japan": "Tokyo",
    "Russia": "Moscow", "China": "Beijing", "Egypt": "Cairo", "Greece": "Athens", "Ireland": "Dublin",
    "Austria": "Vienna", "Poland": "Warsaw", "Norway": "Oslo", "Sweden": "Stockholm", "Cuba": "Havana",
    "Kenya": "Nairobi", "Peru": "Lima", "Canada": "Ottawa", "Australia": "Canberra", "Thailand": "Bangkok",
    "Portugal": "Lisbon", "Hungary": "Budapest", "Turkey": "Ankara", "Iran": "Tehran", "Iraq": "Baghdad",
    "Syria": "Damascus", "Lebanon": "Beirut", "Afghanistan": "Kabul", "Chile": "Santiago", "Venezuela": "Caracas",
    "Belgium": "Brussels", "Denmark": "Copenhagen", "Finland": "Helsinki", "England": "London",
    "Scotland": "Edinburgh", "Mexico": "Mexico", "Argentina": "Buenos", "Colombia": "Bogota",
    "Israel": "Jerusalem", "Pakistan": "Islamabad", "Vietnam": "Hanoi", "Ukraine": "Kiev",
    "Romania": "Bucharest", "Nigeria": "Abuja", "Ethiopia": "Addis", "Indonesia": "Jakarta",
    "the Philippines": "Manila", "South Korea": "Seoul", "North Korea": "Pyongyang", "Saudi Arabia": "Riyadh",
    "Qatar": "Doha", "Nepal": "Kathmandu", "Bulgaria": "Sofia", "Serbia": "Belgrade", "Croatia": "Zagreb",
    "Iceland": "Reykjavik", "Morocco": "Rabat", "Algeria": "Algiers", "Tunisia": "Tunis", "Libya": "Tripoli",
}

LANGUAGES = {
    "France": "French", "Germany": "German", "Italy": "Italian", "Spain": "Spanish", "Japan": "Japanese",
    "Russia": "Russian", "China": "Chinese", "Greece": "Greek", "Poland": "Polish", "Sweden": "Swedish",
    "Portugal": "Portuguese", "Turkey": "Turkish", "Brazil": "Portuguese", "Mexico": "Spanish",
    "Egypt": "Arabic", "Iran": "Persian", "Israel": "Hebrew", "Korea": "Korean", "Vietnam": "Vietnamese",
    "Thailand": "Thai", "the Netherlands": "Dutch", "Norway": "Norwegian", "Finland": "Finnish",
    "Denmark": "Danish", "Hungary": "Hungarian", "Ukraine": "Ukrainian", "Argentina": "Spanish",
    "Austria": "German", "Saudi Arabia": "Arabic", "Indonesia": "Indonesian",
}

OPPOSITES = {
    "hot": "cold", "up": "down", "left": "right", "black": "white", "day": "night", "big": "small",
    "fast": "slow", "old": "new", "open": "closed", "light": "dark", "high": "low", "early": "late",
    "rich": "poor", "hard": "soft", "wet": "dry", "happy": "sad", "strong": "weak", "full": "empty",
    "true": "false", "win": "lose", "north": "south", "east": "west", "buy": "sell", "first": "last",
    "inside": "outside", "push": "pull", "love": "hate", "war": "peace", "good": "bad", "yes": "no",
}

SEQUENCES = {
    "Monday": "Tuesday", "Tuesday": "Wednesday", "Wednesday": "Thursday", "Thursday": "Friday",
    "Friday": "Saturday", "Saturday": "Sunday", "January": "February", "February": "March",
    "March": "April", "April": "May", "May": "June", "June": "July", "July": "August",
    "August": "September", "September": "October", "October": "November", "November": "December",
}

NUMBERS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
           "eleven", "twelve"]

PAST_TENSE = {
    "go": "went", "eat": "ate", "run": "ran", "see": "saw", "write": "wrote", "swim": "swam",
    "sing": "sang", "drink": "drank", "speak": "spoke", "drive": "drove", "fly": "flew", "buy": "bought",
}

FACTS = [
    ("The largest planet in the solar system is", "Jupiter"),
    ("The planet closest to the sun is", "Mercury"),
    ("The red planet is", "Mars"),
    ("Water freezes at zero degrees", "Celsius"),
    ("The chemical symbol for water is", "H"),
    ("Bees make", "honey"),
    ("Cows produce", "milk"),
    ("The color of the sky on a clear day is", "blue"),
    ("The color of grass is", "green"),
    ("Snow is usually", "white"),
    ("A baby cat is called a", "kitten"),
    ("A baby dog is called a", "puppy"),
    ("The animal known as the king of the jungle is the", "lion"),
    ("The tallest animal in the world is the", "giraffe"),
    ("The largest ocean on Earth is the", "Pacific"),
    ("The longest river in Africa is the", "Nile"),
    ("Shakespeare wrote Romeo and", "Juliet"),
    ("The author of Harry Potter is J. K.", "Rowling"),
    ("The first man on the moon was Neil", "Armstrong"),
    ("The inventor of the light bulb is Thomas", "Edison"),
    ("The theory of relativity was developed by Albert", "Einstein"),
    ("The Mona Lisa was painted by Leonardo da", "Vinci"),
    ("A salad spinner is used to remove", "water"),
    ("You can cut paper with a pair of", "scissors"),
    ("People drink coffee from a", "cup"),
    ("The opposite of up is", "down"),
    ("A week has seven", "days"),
    ("A year has twelve", "months"),
    ("An hour has sixty", "minutes"),
    ("Spiders have eight", "legs"),
    ("The currency of Japan is the", "yen"),
    ("The currency of the United Kingdom is the", "pound"),
    ("The currency of the United States is the", "dollar"),
    ("Ice is frozen", "water"),
    ("The sun rises in the", "east"),
    ("The sun sets in the", "west"),
    ("Fish breathe through their", "gills"),
    ("Birds are covered in", "feathers"),
    ("The Statue of Liberty is in New", "York"),
    ("The Eiffel Tower is in", "Paris"),
    ("The Great Wall is in", "China"),
    ("Kangaroos are native to", "Australia"),
    ("The Amazon rainforest is mostly in", "Brazil"),
    ("Pizza comes from", "Italy"),
    ("Sushi comes from", "Japan"),
    ("The human heart pumps", "blood"),
    ("Plants absorb carbon dioxide and release", "oxygen"),
    ("The freezing point of water in Fahrenheit is thirty", "two"),
    ("The smallest prime number is", "two"),
    ("A triangle has three", "sides"),
]


def single_token_filter(vocab):
    return lambda target: ("Ġ" + target) in vocab


def knowledge_items():
    items = []
    for country, city in CAPITALS.items():
        items.append((f"The capital of {country} is", city))
    for country, lang in LANGUAGES.items():
        items.append((f"The official language of {country} is", lang))
    for word, opp in OPPOSITES.items():
        items.append((f"The opposite of {word} is", opp))
    for a, b in SEQUENCES.items():
        items.append((f"The day after {a} is" if a in SEQUENCES and a.endswith("day") else f"The month after {a} is", b))
    for i in range(1, 7):
        for j in range(1, 7):
            if i + j < len(NUMBERS):
                items.append((f"{NUMBERS[i].capitalize()} plus {NUMBERS[j]} equals", NUMBERS[i + j]))
    for verb, past in PAST_TENSE.items():
        items.append((f"Today I {verb}; yesterday I", past))
    items.extend(FACTS)
    return items


def make_corpus(rng):
    related, unrelated = [], []
    for i in range(100):
        n_kw = rng.choice([3, 3, 4])
        sents = rng.sample(WEDDING, n_kw) + rng.sample(WEDDING_CONTEXT, 5 - n_kw)
        rng.shuffle(sents)
        related.append({"id": f"related-{i:03d}", "text": " ".join(sents)})
    topics = sorted(UNRELATED)
    for i in range(100):
        topic = topics[i % len(topics)]
        sents = rng.sample(UNRELATED[topic], 5)
        unrelated.append({"id": f"unrelated-{i:03d}", "text": " ".join(sents)})
    return related, unrelated


def write_jsonl(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    vocab = json.loads(VOCAB.read_text(encoding="utf-8"))
    ok = single_token_filter(vocab)
    rng = random.Random(20230610)

    related, unrelated = make_corpus(rng)
    write_jsonl(HERE / "wedding_corpus" / "related.jsonl", related)
    write_jsonl(HERE / "wedding_corpus" / "unrelated.jsonl", unrelated)

    seen, kept = set(), []
    for prompt, target in knowledge_items():
        if prompt not in seen and ok(target):
            seen.add(prompt)
            kept.append({"prompt": prompt, "target": target})
    if len(kept) < 200:
        raise SystemExit(f"only {len(kept)} single-token knowledge items")
    write_jsonl(HERE / "knowledge.jsonl", kept[:200])

    (HERE / "kl_prompts.txt").write_text("\n".join(KL_PROMPTS) + "\n", encoding="utf-8")
    print(f"corpus: {len(related)} related, {len(unrelated)} unrelated; knowledge: {len(kept[:200])} of {len(kept)}")


if __name__ == "__main__":
    main()
