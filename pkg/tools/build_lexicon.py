"""Regenerate src/langsg/data/lexicon.json from the compact taxonomy below.

The taxonomy follows WordNet naming (word.pos.nn) and parent links for a
curated set of scene-graph concepts.  Hypernym sets are the transitive
closure of the parent links.  Run from the repository root:

    python tools/build_lexicon.py
"""

import json
from pathlib import Path

# synset -> (parent synset or None, lemmas)
SYNSETS = {
    "entity.n.01": (None, ["entity"]),
    "physical_entity.n.01": ("entity.n.01", ["physical entity"]),
    "object.n.01": ("physical_entity.n.01", ["object", "physical object"]),
    "whole.n.02": ("object.n.01", ["whole", "unit"]),
    "living_thing.n.01": ("whole.n.02", ["living thing", "animate thing"]),
    "organism.n.01": ("living_thing.n.01", ["organism", "being"]),
    "person.n.01": ("organism.n.01", ["person", "individual", "someone", "somebody", "mortal"]),
    "male.n.02": ("person.n.01", ["male", "male person"]),
    "female.n.02": ("person.n.01", ["female", "female person"]),
    "adult.n.01": ("person.n.01", ["adult", "grownup"]),
    "man.n.01": ("male.n.02", ["man", "adult male"]),
    "woman.n.01": ("female.n.02", ["woman", "adult female"]),
    "lady.n.01": ("woman.n.01", ["lady"]),
    "boy.n.01": ("male.n.02", ["boy", "male child"]),
    "girl.n.01": ("female.n.02", ["girl", "female child"]),
    "child.n.01": ("person.n.01", ["child", "kid", "youngster"]),
    "guy.n.01": ("man.n.01", ["guy", "hombre"]),
    "contestant.n.01": ("person.n.01", ["contestant"]),
    "player.n.01": ("contestant.n.01", ["player", "participant"]),
    "ballplayer.n.01": ("player.n.01", ["ballplayer", "baseball player"]),
    "tennis_player.n.01": ("player.n.01", ["tennis player"]),
    "skier.n.01": ("person.n.01", ["skier"]),
    "surfer.n.01": ("person.n.01", ["surfer", "surfboarder"]),
    "skateboarder.n.01": ("person.n.01", ["skateboarder"]),
    "animal.n.01": ("organism.n.01", ["animal", "animate being", "beast", "brute", "creature", "fauna"]),
    "chordate.n.01": ("animal.n.01", ["chordate"]),
    "vertebrate.n.01": ("chordate.n.01", ["vertebrate", "craniate"]),
    "mammal.n.01": ("vertebrate.n.01", ["mammal", "mammalian"]),
    "placental.n.01": ("mammal.n.01", ["placental", "eutherian"]),
    "carnivore.n.01": ("placental.n.01", ["carnivore"]),
    "canine.n.02": ("carnivore.n.01", ["canine", "canid"]),
    "dog.n.01": ("canine.n.02", ["dog", "domestic dog", "canis familiaris"]),
    "feline.n.01": ("carnivore.n.01", ["feline", "felid"]),
    "cat.n.01": ("feline.n.01", ["cat", "true cat"]),
    "bear.n.01": ("carnivore.n.01", ["bear"]),
    "ungulate.n.01": ("placental.n.01", ["ungulate", "hoofed mammal"]),
    "odd-toed_ungulate.n.01": ("ungulate.n.01", ["odd-toed ungulate", "perissodactyl"]),
    "equine.n.01": ("odd-toed_ungulate.n.01", ["equine", "equid"]),
    "horse.n.01": ("equine.n.01", ["horse", "equus caballus"]),
    "zebra.n.01": ("equine.n.01", ["zebra"]),
    "even-toed_ungulate.n.01": ("ungulate.n.01", ["even-toed ungulate", "artiodactyl"]),
    "ruminant.n.01": ("even-toed_ungulate.n.01", ["ruminant"]),
    "giraffe.n.01": ("ruminant.n.01", ["giraffe", "camelopard"]),
    "bovid.n.01": ("ruminant.n.01", ["bovid"]),
    "cattle.n.01": ("bovid.n.01", ["cattle", "cows", "kine", "oxen"]),
    "cow.n.01": ("cattle.n.01", ["cow"]),
    "sheep.n.01": ("bovid.n.01", ["sheep"]),
    "proboscidean.n.01": ("placental.n.01", ["proboscidean", "proboscidian"]),
    "elephant.n.01": ("proboscidean.n.01", ["elephant"]),
    "reptile.n.01": ("vertebrate.n.01", ["reptile", "reptilian"]),
    "anapsid.n.01": ("reptile.n.01", ["anapsid"]),
    "chelonian.n.01": ("anapsid.n.01", ["chelonian", "chelonian reptile"]),
    "turtle.n.02": ("chelonian.n.01", ["turtle"]),
    "tortoise.n.01": ("turtle.n.02", ["tortoise"]),
    "bird.n.01": ("vertebrate.n.01", ["bird"]),
    "duck.n.01": ("bird.n.01", ["duck"]),
    "gull.n.02": ("bird.n.01", ["gull", "seagull", "sea gull"]),
    "pigeon.n.01": ("bird.n.01", ["pigeon"]),
    "aquatic_vertebrate.n.01": ("vertebrate.n.01", ["aquatic vertebrate"]),
    "fish.n.01": ("aquatic_vertebrate.n.01", ["fish"]),
    "plant.n.02": ("organism.n.01", ["plant", "flora", "plant life"]),
    "vascular_plant.n.01": ("plant.n.02", ["vascular plant", "tracheophyte"]),
    "woody_plant.n.01": ("vascular_plant.n.01", ["woody plant", "ligneous plant"]),
    "tree.n.01": ("woody_plant.n.01", ["tree"]),
    "shrub.n.01": ("woody_plant.n.01", ["shrub", "bush"]),
    "herb.n.01": ("vascular_plant.n.01", ["herb", "herbaceous plant"]),
    "grass.n.01": ("herb.n.01", ["grass"]),
    "angiosperm.n.01": ("vascular_plant.n.01", ["angiosperm", "flowering plant"]),
    "flower.n.01": ("angiosperm.n.01", ["flower"]),
    "artifact.n.01": ("whole.n.02", ["artifact", "artefact"]),
    "instrumentality.n.03": ("artifact.n.01", ["instrumentality", "instrumentation"]),
    "conveyance.n.03": ("instrumentality.n.03", ["conveyance", "transport"]),
    "vehicle.n.01": ("conveyance.n.03", ["vehicle"]),
    "wheeled_vehicle.n.01": ("vehicle.n.01", ["wheeled vehicle"]),
    "self-propelled_vehicle.n.01": ("wheeled_vehicle.n.01", ["self-propelled vehicle"]),
    "motor_vehicle.n.01": ("self-propelled_vehicle.n.01", ["motor vehicle", "automotive vehicle"]),
    "car.n.01": ("motor_vehicle.n.01", ["car", "auto", "automobile", "motorcar"]),
    "truck.n.01": ("motor_vehicle.n.01", ["truck", "motortruck"]),
    "motorcycle.n.01": ("motor_vehicle.n.01", ["motorcycle", "bike"]),
    "bicycle.n.01": ("wheeled_vehicle.n.01", ["bicycle", "bike", "cycle"]),
    "public_transport.n.01": ("conveyance.n.03", ["public transport"]),
    "bus.n.01": ("public_transport.n.01", ["bus", "autobus", "coach", "omnibus"]),
    "train.n.01": ("public_transport.n.01", ["train", "railroad train"]),
    "craft.n.02": ("vehicle.n.01", ["craft"]),
    "vessel.n.02": ("craft.n.02", ["vessel", "watercraft"]),
    "boat.n.01": ("vessel.n.02", ["boat"]),
    "aircraft.n.01": ("craft.n.02", ["aircraft"]),
    "airplane.n.01": ("aircraft.n.01", ["airplane", "aeroplane", "plane"]),
    "board.n.02": ("instrumentality.n.03", ["board"]),
    "skateboard.n.01": ("board.n.02", ["skateboard"]),
    "surfboard.n.01": ("board.n.02", ["surfboard"]),
    "ski.n.01": ("instrumentality.n.03", ["ski"]),
    "furnishing.n.02": ("instrumentality.n.03", ["furnishing"]),
    "furniture.n.01": ("furnishing.n.02", ["furniture", "piece of furniture"]),
    "table.n.02": ("furniture.n.01", ["table"]),
    "desk.n.01": ("table.n.02", ["desk"]),
    "seat.n.03": ("furniture.n.01", ["seat"]),
    "chair.n.01": ("seat.n.03", ["chair"]),
    "bench.n.01": ("seat.n.03", ["bench"]),
    "sofa.n.01": ("seat.n.03", ["sofa", "couch", "lounge"]),
    "bed.n.01": ("furniture.n.01", ["bed"]),
    "container.n.01": ("instrumentality.n.03", ["container"]),
    "vessel.n.03": ("container.n.01", ["vessel"]),
    "cup.n.01": ("vessel.n.03", ["cup"]),
    "bowl.n.03": ("vessel.n.03", ["bowl"]),
    "bottle.n.01": ("vessel.n.03", ["bottle"]),
    "vase.n.01": ("vessel.n.03", ["vase"]),
    "bag.n.01": ("container.n.01", ["bag"]),
    "basket.n.01": ("container.n.01", ["basket", "handbasket"]),
    "tableware.n.01": ("instrumentality.n.03", ["tableware"]),
    "crockery.n.01": ("tableware.n.01", ["crockery", "dishware"]),
    "plate.n.04": ("crockery.n.01", ["plate"]),
    "device.n.01": ("instrumentality.n.03", ["device"]),
    "telephone.n.01": ("device.n.01", ["telephone", "phone", "telephone set"]),
    "computer.n.01": ("device.n.01", ["computer", "computing machine"]),
    "laptop.n.01": ("computer.n.01", ["laptop", "laptop computer"]),
    "keyboard.n.01": ("device.n.01", ["keyboard"]),
    "mouse.n.04": ("device.n.01", ["mouse", "computer mouse"]),
    "timepiece.n.01": ("device.n.01", ["timepiece", "timekeeper", "horologe"]),
    "clock.n.01": ("timepiece.n.01", ["clock"]),
    "umbrella.n.01": ("device.n.01", ["umbrella"]),
    "light.n.02": ("device.n.01", ["light", "light source"]),
    "lamp.n.02": ("light.n.02", ["lamp"]),
    "equipment.n.01": ("instrumentality.n.03", ["equipment"]),
    "game_equipment.n.01": ("equipment.n.01", ["game equipment"]),
    "ball.n.01": ("game_equipment.n.01", ["ball"]),
    "kite.n.03": ("game_equipment.n.01", ["kite"]),
    "sports_implement.n.01": ("equipment.n.01", ["sports implement"]),
    "racket.n.04": ("sports_implement.n.01", ["racket", "racquet"]),
    "bat.n.05": ("sports_implement.n.01", ["bat", "baseball bat"]),
    "commodity.n.01": ("artifact.n.01", ["commodity", "trade good", "good"]),
    "consumer_goods.n.01": ("commodity.n.01", ["consumer goods"]),
    "clothing.n.01": ("consumer_goods.n.01", ["clothing", "article of clothing", "vesture", "wear", "wearable"]),
    "garment.n.01": ("clothing.n.01", ["garment"]),
    "shirt.n.01": ("garment.n.01", ["shirt"]),
    "coat.n.01": ("garment.n.01", ["coat"]),
    "jacket.n.01": ("coat.n.01", ["jacket"]),
    "trouser.n.01": ("garment.n.01", ["trouser", "pant", "pants", "trousers"]),
    "jean.n.01": ("trouser.n.01", ["jean", "blue jean", "denim", "jeans"]),
    "short_pants.n.01": ("trouser.n.01", ["short pants", "shorts", "trunks"]),
    "dress.n.01": ("garment.n.01", ["dress", "frock"]),
    "necktie.n.01": ("garment.n.01", ["necktie", "tie"]),
    "headdress.n.01": ("clothing.n.01", ["headdress", "headgear"]),
    "hat.n.01": ("headdress.n.01", ["hat", "chapeau", "lid"]),
    "cap.n.01": ("headdress.n.01", ["cap"]),
    "helmet.n.02": ("headdress.n.01", ["helmet"]),
    "footwear.n.02": ("clothing.n.01", ["footwear", "footgear"]),
    "shoe.n.01": ("footwear.n.02", ["shoe"]),
    "boot.n.01": ("footwear.n.02", ["boot"]),
    "glasses.n.01": ("device.n.01", ["glasses", "spectacles", "specs", "eyeglasses"]),
    "structure.n.01": ("artifact.n.01", ["structure", "construction"]),
    "building.n.01": ("structure.n.01", ["building", "edifice"]),
    "house.n.01": ("building.n.01", ["house"]),
    "tower.n.01": ("structure.n.01", ["tower"]),
    "bridge.n.01": ("structure.n.01", ["bridge", "span"]),
    "fence.n.01": ("structure.n.01", ["fence", "fencing"]),
    "wall.n.01": ("structure.n.01", ["wall"]),
    "sign.n.02": ("structure.n.01", ["sign"]),
    "window.n.01": ("structure.n.01", ["window"]),
    "door.n.01": ("structure.n.01", ["door"]),
    "pole.n.01": ("instrumentality.n.03", ["pole"]),
    "way.n.06": ("artifact.n.01", ["way"]),
    "road.n.01": ("way.n.06", ["road", "route"]),
    "street.n.01": ("road.n.01", ["street"]),
    "sidewalk.n.01": ("way.n.06", ["sidewalk", "pavement"]),
    "track.n.01": ("way.n.06", ["track", "rail"]),
    "wheel.n.01": ("instrumentality.n.03", ["wheel"]),
    "tire.n.01": ("instrumentality.n.03", ["tire", "tyre"]),
    "matter.n.03": ("physical_entity.n.01", ["matter"]),
    "food.n.02": ("matter.n.03", ["food", "solid food"]),
    "dish.n.02": ("food.n.02", ["dish"]),
    "pizza.n.01": ("dish.n.02", ["pizza", "pizza pie"]),
    "sandwich.n.01": ("dish.n.02", ["sandwich"]),
    "edible_fruit.n.01": ("food.n.02", ["edible fruit"]),
    "banana.n.02": ("edible_fruit.n.01", ["banana"]),
    "orange.n.01": ("edible_fruit.n.01", ["orange"]),
    "apple.n.01": ("edible_fruit.n.01", ["apple"]),
    "baked_goods.n.01": ("food.n.02", ["baked goods"]),
    "cake.n.03": ("baked_goods.n.01", ["cake"]),
    "donut.n.01": ("baked_goods.n.01", ["donut", "doughnut"]),
    "vegetable.n.01": ("food.n.02", ["vegetable", "veggie"]),
    "broccoli.n.02": ("vegetable.n.01", ["broccoli"]),
    "fluid.n.02": ("matter.n.03", ["fluid"]),
    "liquid.n.01": ("fluid.n.02", ["liquid"]),
    "water.n.01": ("liquid.n.01", ["water", "h2o"]),
    "snow.n.02": ("matter.n.03", ["snow", "snowfall"]),
    "location.n.01": ("physical_entity.n.01", ["location"]),
    "region.n.03": ("location.n.01", ["region", "part"]),
    "field.n.01": ("region.n.03", ["field"]),
    "beach.n.01": ("region.n.03", ["beach"]),
    "sky.n.01": ("location.n.01", ["sky"]),
    "mountain.n.01": ("object.n.01", ["mountain", "mount"]),
    "rock.n.01": ("object.n.01", ["rock", "stone"]),
    "body_of_water.n.01": ("object.n.01", ["body of water", "water"]),
    "ocean.n.01": ("body_of_water.n.01", ["ocean"]),
    "body_part.n.01": ("object.n.01", ["body part"]),
    "head.n.01": ("body_part.n.01", ["head", "caput"]),
    "face.n.01": ("body_part.n.01", ["face", "human face"]),
    "hair.n.01": ("body_part.n.01", ["hair"]),
    "eye.n.01": ("body_part.n.01", ["eye", "oculus"]),
    "ear.n.01": ("body_part.n.01", ["ear"]),
    "nose.n.01": ("body_part.n.01", ["nose"]),
    "mouth.n.01": ("body_part.n.01", ["mouth"]),
    "extremity.n.05": ("body_part.n.01", ["extremity"]),
    "hand.n.01": ("extremity.n.05", ["hand", "manus", "mitt", "paw"]),
    "arm.n.01": ("extremity.n.05", ["arm"]),
    "leg.n.01": ("extremity.n.05", ["leg"]),
    "tail.n.01": ("body_part.n.01", ["tail"]),
    "plant_part.n.01": ("object.n.01", ["plant part", "plant structure"]),
    "leaf.n.01": ("plant_part.n.01", ["leaf", "leafage", "foliage"]),
    "branch.n.02": ("plant_part.n.01", ["branch"]),
}

# concept string -> (synsets, root form); synsets may be empty for root-only concepts.
NOUN_CONCEPTS = {
    "person": ["person.n.01"], "people": ["person.n.01"], "man": ["man.n.01"],
    "woman": ["woman.n.01"], "lady": ["lady.n.01"], "boy": ["boy.n.01"], "girl": ["girl.n.01"],
    "child": ["child.n.01"], "kid": ["child.n.01"], "guy": ["guy.n.01"],
    "player": ["player.n.01"], "baseball player": ["ballplayer.n.01"],
    "tennis player": ["tennis_player.n.01"], "skier": ["skier.n.01"], "surfer": ["surfer.n.01"],
    "skateboarder": ["skateboarder.n.01"], "animal": ["animal.n.01"], "mammal": ["mammal.n.01"],
    "dog": ["dog.n.01"], "puppy": ["dog.n.01"], "cat": ["cat.n.01"], "kitten": ["cat.n.01"],
    "bear": ["bear.n.01"], "horse": ["horse.n.01"], "zebra": ["zebra.n.01"],
    "giraffe": ["giraffe.n.01"], "cow": ["cow.n.01"], "cattle": ["cattle.n.01"],
    "sheep": ["sheep.n.01"], "elephant": ["elephant.n.01"], "reptile": ["reptile.n.01"],
    "turtle": ["turtle.n.02"], "tortoise": ["tortoise.n.01"], "bird": ["bird.n.01"],
    "duck": ["duck.n.01"], "seagull": ["gull.n.02"], "pigeon": ["pigeon.n.01"], "fish": ["fish.n.01"],
    "plant": ["plant.n.02"], "tree": ["tree.n.01"], "bush": ["shrub.n.01"], "grass": ["grass.n.01"],
    "flower": ["flower.n.01"], "vehicle": ["vehicle.n.01"], "car": ["car.n.01"],
    "truck": ["truck.n.01"], "motorcycle": ["motorcycle.n.01"], "bike": ["bicycle.n.01", "motorcycle.n.01"],
    "bicycle": ["bicycle.n.01"], "bus": ["bus.n.01"], "train": ["train.n.01"], "boat": ["boat.n.01"],
    "airplane": ["airplane.n.01"], "plane": ["airplane.n.01"], "skateboard": ["skateboard.n.01"],
    "surfboard": ["surfboard.n.01"], "ski": ["ski.n.01"], "furniture": ["furniture.n.01"],
    "table": ["table.n.02"], "desk": ["desk.n.01"], "chair": ["chair.n.01"], "bench": ["bench.n.01"],
    "couch": ["sofa.n.01"], "sofa": ["sofa.n.01"], "bed": ["bed.n.01"], "cup": ["cup.n.01"],
    "mug": ["cup.n.01"], "bowl": ["bowl.n.03"], "bottle": ["bottle.n.01"], "vase": ["vase.n.01"],
    "bag": ["bag.n.01"], "basket": ["basket.n.01"], "plate": ["plate.n.04"], "phone": ["telephone.n.01"],
    "computer": ["computer.n.01"], "laptop": ["laptop.n.01"], "keyboard": ["keyboard.n.01"],
    "mouse": ["mouse.n.04"], "clock": ["clock.n.01"], "umbrella": ["umbrella.n.01"], "lamp": ["lamp.n.02"],
    "light": ["light.n.02"], "ball": ["ball.n.01"], "kite": ["kite.n.03"], "racket": ["racket.n.04"],
    "tennis racket": ["racket.n.04"], "bat": ["bat.n.05"], "baseball bat": ["bat.n.05"],
    "clothing": ["clothing.n.01"], "shirt": ["shirt.n.01"], "t-shirt": ["shirt.n.01"],
    "jacket": ["jacket.n.01"], "coat": ["coat.n.01"], "pants": ["trouser.n.01"], "jeans": ["jean.n.01"],
    "shorts": ["short_pants.n.01"], "dress": ["dress.n.01"], "tie": ["necktie.n.01"],
    "hat": ["hat.n.01"], "cap": ["cap.n.01"], "helmet": ["helmet.n.02"], "shoe": ["shoe.n.01"],
    "boot": ["boot.n.01"], "glasses": ["glasses.n.01"], "building": ["building.n.01"],
    "house": ["house.n.01"], "tower": ["tower.n.01"], "bridge": ["bridge.n.01"], "fence": ["fence.n.01"],
    "wall": ["wall.n.01"], "sign": ["sign.n.02"], "street sign": ["sign.n.02"], "window": ["window.n.01"],
    "door": ["door.n.01"], "pole": ["pole.n.01"], "road": ["road.n.01"], "street": ["street.n.01"],
    "sidewalk": ["sidewalk.n.01"], "track": ["track.n.01"], "wheel": ["wheel.n.01"], "tire": ["tire.n.01"],
    "food": ["food.n.02"], "pizza": ["pizza.n.01"], "sandwich": ["sandwich.n.01"],
    "banana": ["banana.n.02"], "orange": ["orange.n.01"], "apple": ["apple.n.01"], "cake": ["cake.n.03"],
    "donut": ["donut.n.01"], "vegetable": ["vegetable.n.01"], "broccoli": ["broccoli.n.02"],
    "water": ["water.n.01", "body_of_water.n.01"], "snow": ["snow.n.02"], "field": ["field.n.01"],
    "beach": ["beach.n.01"], "sky": ["sky.n.01"], "mountain": ["mountain.n.01"], "rock": ["rock.n.01"],
    "ocean": ["ocean.n.01"], "head": ["head.n.01"], "face": ["face.n.01"], "hair": ["hair.n.01"],
    "eye": ["eye.n.01"], "ear": ["ear.n.01"], "nose": ["nose.n.01"], "mouth": ["mouth.n.01"],
    "hand": ["hand.n.01"], "arm": ["arm.n.01"], "leg": ["leg.n.01"], "tail": ["tail.n.01"],
    "leaf": ["leaf.n.01"], "branch": ["branch.n.02"],
}

# predicate -> (synsets, root form, extra lemmas); each base form also gets an -ing entry
PREDICATES = {
    "on": ([], "on", []), "in": ([], "in", ["inside"]), "at": ([], "at", []),
    "with": ([], "with", []), "near": ([], "near", ["beside", "next to", "by"]),
    "under": ([], "under", ["beneath", "below", "underneath"]), "above": ([], "above", ["over"]),
    "behind": ([], "behind", []), "in front of": ([], "in front of", []), "of": ([], "of", []),
    "on top of": ([], "on", []),
    "have": (["have.v.01"], "have", ["has"]), "hold": (["hold.v.02"], "hold", ["holds"]),
    "wear": (["wear.v.01"], "wear", ["wears"]), "ride": (["ride.v.01"], "ride", ["rides"]),
    "drive": (["drive.v.01"], "drive", ["drives"]), "eat": (["eat.v.01"], "eat", ["eats"]),
    "carry": (["carry.v.01"], "carry", ["carries"]), "sit on": (["sit.v.01"], "sit on", []),
    "stand on": (["stand.v.01"], "stand on", []), "walk on": (["walk.v.01"], "walk on", []),
    "lie on": (["lie.v.02"], "lie on", ["lay on", "laying on"]), "look at": (["look.v.01"], "look at", []),
    "watch": (["watch.v.01"], "watch", []), "play": (["play.v.01"], "play", []),
    "park on": (["park.v.01"], "park on", ["parked on"]), "hang from": (["hang.v.01"], "hang from", []),
    "cover": (["cover.v.01"], "cover", ["covered in"]), "swing": (["swing.v.01"], "swing", []),
    "throw": (["throw.v.01"], "throw", []), "catch": (["catch.v.01"], "catch", []),
    "pull": (["pull.v.01"], "pull", []), "graze on": (["graze.v.01"], "graze on", []),
    "fly": (["fly.v.01"], "fly", []), "belong to": (["belong.v.01"], "belong to", []),
    "against": ([], "against", []), "along": ([], "along", []), "across": ([], "across", []),
}

ING = {"have": "having", "hold": "holding", "wear": "wearing", "ride": "riding",
       "drive": "driving", "eat": "eating", "carry": "carrying", "sit": "sitting",
       "stand": "standing", "walk": "walking", "lie": "lying", "look": "looking",
       "watch": "watching", "play": "playing", "park": "parked", "hang": "hanging",
       "cover": "covering", "swing": "swinging", "throw": "throwing", "catch": "catching",
       "pull": "pulling", "graze": "grazing", "fly": "flying", "belong": "belonging"}


def _closure(synset):
    out = []
    parent = SYNSETS[synset][0]
    while parent is not None:
        out.append(parent)
        parent = SYNSETS[parent][0]
    return out


def build():
    lex = {}
    for concept, synsets in NOUN_CONCEPTS.items():
        lemmas = {concept}
        hyper = set()
        for s in synsets:
            lemmas.update(SYNSETS[s][1])
            hyper.update(_closure(s))
        root = concept.split()[-1]
        lex[concept] = {
            "lemmas": sorted(lemmas), "synsets": sorted(synsets),
            "hypernyms": sorted(hyper), "root": root,
        }
    for base, (synsets, root, extra) in PREDICATES.items():
        words = base.split()
        forms = {base, *extra}
        if words[0] in ING:
            forms.add(" ".join([ING[words[0]], *words[1:]]))
        entry = {"lemmas": sorted(forms), "synsets": sorted(synsets), "hypernyms": [], "root": root}
        for form in sorted(forms):
            lex.setdefault(form, entry)
    return dict(sorted(lex.items()))


if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "langsg" / "data" / "lexicon.json"
    lex = build()
    out.write_text(json.dumps(lex, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(lex)} concepts to {out}")
